//! Small numeric helpers shared across modules.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Angle between two nonzero vectors, in degrees.
pub fn angle_degrees(a: &[f64], b: &[f64]) -> f64 {
    let c = dot(a, b) / (norm2(a) * norm2(b));
    c.clamp(-1.0, 1.0).acos().to_degrees()
}

pub fn normalized(a: &[f64]) -> Vec<f64> {
    let n = norm2(a);
    a.iter().map(|x| x / n).collect()
}

/// SplitMix64 finalizer. Used to derive independent sub-seeds from a
/// master seed: `derive_seed(master, r)` depends only on `(master, r)`, so
/// any replication can be rerun in isolation.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(master) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_of_orthogonal_vectors() {
        assert!((angle_degrees(&[1.0, 0.0], &[0.0, 2.0]) - 90.0).abs() < 1e-12);
        assert!(angle_degrees(&[1.0, 1.0], &[3.0, 3.0]) < 1e-6);
    }

    #[test]
    fn derived_seeds_differ_by_stream() {
        let a = derive_seed(7, 0);
        let b = derive_seed(7, 1);
        assert_ne!(a, b);
        assert_eq!(a, derive_seed(7, 0));
    }
}
