use std::fs;
use std::io::Write;
use std::path::Path;

use cmchoice::aggregate::{estimate_beta_aggregate, read_aggregate_csv};
use cmchoice::check::{run_battery, CheckOptions, Fault};
use cmchoice::identset::{
    sample_g_set, scan_identified_set, scan_support_sequence, singleton_diagnostic, DiscreteDgp, GridSpec, IdSetGrid,
};
use cmchoice::simulate::{run_monte_carlo, simulate_aggregate, simulate_panel, AggregateDgpConfig, ControlDesign, McDgpConfig, McTable};
use cmchoice::{estimate_panel, estimate_panel_matched, EstimateResult, EstimatorOptions, KChoice, OptimizerOptions, PanelDataset};

use crate::args::{
    AggregateArgs, CheckArgs, Design, EstimateArgs, FaultArg, FirstStageArgs, IdsetArgs, MonteCarloArgs, OptimizerArgs, SimulateArgs,
};
use crate::failure::Failure;

type Outcome = Result<(), Failure>;

fn k_choice(a: &FirstStageArgs) -> Result<KChoice, Failure> {
    match (&a.k, &a.k_grid) {
        (Some(0), _) => Err(Failure::Usage("--k must be positive".into())),
        (Some(k), _) => Ok(KChoice::Fixed(*k)),
        (None, Some(g)) if g.is_empty() || g.contains(&0) => Err(Failure::Usage("--k-grid entries must be positive".into())),
        (None, g) => Ok(KChoice::CrossValidate(g.clone())),
    }
}

fn optimizer(a: &OptimizerArgs, seed: u64) -> Result<OptimizerOptions, Failure> {
    if a.max_iter == 0 {
        return Err(Failure::Usage("--max-iter must be positive".into()));
    }
    Ok(OptimizerOptions { max_iter: a.max_iter, restarts: a.restarts, seed, ..Default::default() })
}

fn write_result(result: &EstimateResult, output: Option<&Path>) -> Outcome {
    let doc = result.to_document();
    match output {
        Some(p) => fs::write(p, doc)?,
        None => print!("{doc}"),
    }
    if let Some(note) = &result.note {
        eprintln!("warning: {note}");
    }
    Ok(())
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

pub fn simulate(a: &SimulateArgs) -> Outcome {
    if a.n == 0 {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    if a.aggregate {
        if a.controls {
            return Err(Failure::Usage("--controls applies to panel simulation only".into()));
        }
        if a.consumers == Some(0) {
            return Err(Failure::Usage("--consumers must be positive".into()));
        }
        let cfg = AggregateDgpConfig { consumers: a.consumers, ..AggregateDgpConfig::new(a.n, a.seed) };
        let d = simulate_aggregate(&cfg)?;
        d.write_csv(&a.output)?;
        println!(
            "wrote {} markets x {} periods x {} options ({} rows) to {}",
            d.markets(),
            d.periods(),
            d.options(),
            d.markets() * d.periods() * d.options(),
            a.output.display()
        );
        return Ok(());
    }
    let mut cfg = McDgpConfig::new(a.n, a.seed);
    if a.controls {
        cfg = cfg.with_control(ControlDesign::default());
    }
    let d = simulate_panel(&cfg)?;
    d.write_csv(&a.output)?;
    let mut shares = vec![0usize; d.options() + 1];
    for i in 0..d.n() {
        for t in 0..d.periods() {
            shares[d.choice(i, t)] += 1;
        }
    }
    let total = (d.n() * d.periods()) as f64;
    let shares: Vec<String> = shares.iter().map(|c| format!("{:.3}", *c as f64 / total)).collect();
    println!("wrote {} individuals x {} periods ({} rows) to {}", d.n(), d.periods(), d.n() * d.periods(), a.output.display());
    println!("choice shares (0..{}): {}", d.options(), shares.join(" "));
    Ok(())
}

pub fn estimate(a: &EstimateArgs) -> Outcome {
    let d = PanelDataset::read_csv(&a.input)?;
    if a.controls && !d.has_controls() {
        return Err(Failure::Usage(format!("--controls needs a z column, none in {}", a.input.display())));
    }
    let report = d.validate();
    if !report.ok {
        eprint!("{report}");
        return Err(Failure::Data(format!("{} failed validation", a.input.display())));
    }
    for w in report.warnings() {
        eprintln!("warning: {}: {}", w.location, w.message);
    }
    let opts = EstimatorOptions { k: k_choice(&a.first_stage)?, optimizer: optimizer(&a.optimizer, a.seed)?, min_cell: None };
    let est = if a.controls { estimate_panel_matched(&d, &opts)? } else { estimate_panel(&d, &opts)? };
    for w in &est.warnings {
        eprintln!("warning: {w}");
    }
    for (idx, cv) in est.cv.iter().enumerate() {
        eprintln!("first stage {}: k = {} (grid {:?})", idx + 1, cv.k_star, cv.k_grid);
    }
    if let Some(p) = &a.terms {
        est.terms.write_csv(p)?;
    }
    if !est.result.qn_value.is_finite() || est.result.beta_hat.iter().any(|v| !v.is_finite()) {
        return Err(Failure::Numerical("non-finite estimate".into()));
    }
    eprintln!("beta_hat = ({}), Q_n = {:.6e}", join(&est.result.beta_hat), est.result.qn_value);
    write_result(&est.result, a.output.as_deref())
}

pub fn montecarlo(a: &MonteCarloArgs) -> Outcome {
    let (sizes, reps) = if a.full { (vec![250, 500, 1000, 2000], 6000) } else { (a.n.clone(), a.reps) };
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Failure::Usage("--n values must be positive".into()));
    }
    if reps < 2 {
        return Err(Failure::Usage("--reps must be at least 2".into()));
    }
    let opts = EstimatorOptions { k: k_choice(&a.first_stage)?, optimizer: optimizer(&a.optimizer, 0)?, min_cell: None };
    let mut tables = Vec::new();
    for &n in &sizes {
        let table = run_monte_carlo(&McDgpConfig::new(n, a.seed), reps, &opts).map_err(|e| Failure::Numerical(e.to_string()))?;
        if table.failed > 0 {
            eprintln!("n = {n}: {} of {} replications failed and were excluded", table.failed, table.repetitions);
        }
        tables.push(table);
    }
    print!("{}", McTable::render_text(&tables));
    if let Some(p) = &a.output {
        let mut f = fs::File::create(p)?;
        writeln!(f, "{}", McTable::csv_header(tables[0].bias.len()))?;
        for t in &tables {
            writeln!(f, "{}", t.csv_row())?;
        }
    }
    Ok(())
}

fn save_grid(grid: &IdSetGrid, dir: &Path, stem: &str) -> Outcome {
    grid.save_csv(dir.join(format!("{stem}.csv")))?;
    grid.save_pbm(dir.join(format!("{stem}.pbm")))?;
    Ok(())
}

pub fn idset(a: &IdsetArgs) -> Outcome {
    let (dmin, dmax, dsteps) = match a.design {
        Design::SupportPoints => (0.5, 1.9, 100),
        Design::Bounded => (-1.0, 2.0, 200),
    };
    let (min, max, steps) = (a.grid_min.unwrap_or(dmin), a.grid_max.unwrap_or(dmax), a.grid_steps.unwrap_or(dsteps));
    if min.is_nan() || max.is_nan() || max <= min || steps == 0 {
        return Err(Failure::Usage("grid needs --grid-min < --grid-max and --grid-steps >= 1".into()));
    }
    if a.pairs_budget == 0 {
        return Err(Failure::Usage("--pairs-budget must be positive".into()));
    }
    fs::create_dir_all(&a.output)?;
    let spec = GridSpec::square(min, max, steps);
    match a.design {
        Design::SupportPoints => {
            if a.s_points.is_empty() || a.s_points.contains(&0) {
                return Err(Failure::Usage("--s-points values must be positive".into()));
            }
            let scans = scan_support_sequence(&a.s_points, a.pairs_budget, a.seed, &spec)?;
            println!("{:>3} {:>10} {:>8} {:>10} {:>9}", "s", "inequal.", "cells", "area", "has(1,1)");
            for scan in &scans {
                let g = &scan.grid;
                println!("{:>3} {:>10} {:>8} {:>10.5} {:>9}", scan.s, scan.sample.len(), g.count(), g.area, g.contains_point(1.0, 1.0));
                save_grid(g, &a.output, &format!("idset_s{}", scan.s))?;
            }
        }
        Design::Bounded => {
            let dgp = DiscreteDgp::bounded_finite_design()?;
            let gs = sample_g_set(&dgp, a.pairs_budget, a.seed, 2)?;
            let grid = scan_identified_set(&gs, &spec)?;
            println!("cells = {}, area = {:.5}, singleton = {}", grid.count(), grid.area, singleton_diagnostic(&grid, None));
            save_grid(&grid, &a.output, "idset_bounded")?;
        }
    }
    Ok(())
}

pub fn aggregate(a: &AggregateArgs) -> Outcome {
    let mut d = read_aggregate_csv(&a.input)?;
    if let Some(cols) = &a.interaction {
        match cols.as_slice() {
            [j1, j2] if *j1 >= 1 && *j2 >= 1 => d = d.with_interaction(j1 - 1, j2 - 1)?,
            _ => return Err(Failure::Usage("--interaction takes two 1-based column numbers, e.g. 1,2".into())),
        }
    }
    let report = d.validate();
    if !report.ok {
        eprint!("{report}");
        return Err(Failure::Data(format!("{} failed validation", a.input.display())));
    }
    for w in report.warnings() {
        eprintln!("note: {}", w.message);
    }
    let result = estimate_beta_aggregate(&d, &optimizer(&a.optimizer, a.seed)?)?;
    eprintln!("{} markets, beta_hat = ({}), Q_n = {:.6e}", d.markets(), join(&result.beta_hat), result.qn_value);
    write_result(&result, a.output.as_deref())
}

pub fn check(a: &CheckArgs) -> Outcome {
    let fault = a.inject_fault.map(|f| match f {
        FaultArg::HingeSign => Fault::HingeSignFlip,
    });
    let outcomes = run_battery(&CheckOptions { quick: a.quick, seed: a.seed, fault });
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        return Err(Failure::Numerical(format!("{failed} of {} checks failed", outcomes.len())));
    }
    Ok(())
}
