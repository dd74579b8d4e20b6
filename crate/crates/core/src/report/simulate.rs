use serde::Serialize;

use crate::delay::{assess, DelayQuery};
use crate::error::Result;
use crate::mc::{simulate, SimConfig, SimulationReport};
use crate::report::scenario::Scenario;
use crate::report::sweep::build_designs;

/// Simulated and analytic operating characteristics for one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationRow {
    pub spacing: String,
    pub stages: usize,
    pub query: DelayQuery,
    pub simulated: SimulationReport,
    pub analytic_accept: Vec<f64>,
    pub analytic_reject: Vec<f64>,
    pub analytic_ess: f64,
    pub analytic_ess_delay: f64,
    pub analytic_et: f64,
}

/// One simulation per design and delay query, all sharing `seed`.
pub fn run_simulations(
    scenario: &Scenario,
    replicates: u64,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<SimulationRow>> {
    let designs = build_designs(scenario, threads)?;
    let mut rows = Vec::new();
    for (g, d) in scenario.designs.iter().zip(&designs) {
        for q in scenario.queries() {
            let mut config = SimConfig::new(replicates, seed).delay(q);
            config.threads = threads;
            let simulated = simulate(d, &config)?;
            let a = assess(d, &q)?;
            rows.push(SimulationRow {
                spacing: g.spacing.clone(),
                stages: d.stages(),
                query: q,
                simulated,
                analytic_accept: d.exit().accept().to_vec(),
                analytic_reject: d.exit().reject().to_vec(),
                analytic_ess: d.ess(),
                analytic_ess_delay: a.ess_delay,
                analytic_et: a.time.et,
            });
        }
    }
    Ok(rows)
}
