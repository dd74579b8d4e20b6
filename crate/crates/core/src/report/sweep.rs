use rayon::prelude::*;

use crate::delay::assess;
use crate::design::{build_design, GroupSequentialDesign};
use crate::error::Result;
use crate::mc::in_pool;
use crate::report::scenario::Scenario;
use crate::report::table::{ResultRow, ResultTable, MAX_PIPELINE_COLUMNS};

/// Builds every design of the scenario, in scenario order.
pub fn build_designs(
    scenario: &Scenario,
    threads: Option<usize>,
) -> Result<Vec<GroupSequentialDesign>> {
    in_pool(threads, || {
        scenario
            .designs
            .par_iter()
            .map(|g| build_design(&g.spec))
            .collect::<Result<Vec<_>>>()
    })?
}

/// Evaluates the full grid: designs outermost, then recruitment pattern, then delay.
pub fn run_sweep(scenario: &Scenario, threads: Option<usize>) -> Result<ResultTable> {
    for g in &scenario.designs {
        if g.spec.stages() > MAX_PIPELINE_COLUMNS {
            return Err(crate::Error::invalid(format!(
                "sweeps support at most {MAX_PIPELINE_COLUMNS} stages, got {}",
                g.spec.stages()
            )));
        }
    }
    let designs = build_designs(scenario, threads)?;
    let queries = scenario.queries();
    let cells: Vec<(usize, usize)> = (0..designs.len())
        .flat_map(|d| (0..queries.len()).map(move |q| (d, q)))
        .collect();
    let rows = in_pool(threads, || {
        cells
            .par_iter()
            .map(|&(d, q)| {
                let a = assess(&designs[d], &queries[q])?;
                ResultRow::from_assessment(
                    &designs[d],
                    &scenario.designs[d].spacing,
                    &queries[q],
                    &a,
                )
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(ResultTable::new(provenance(scenario)?, rows))
}

fn provenance(scenario: &Scenario) -> Result<Vec<String>> {
    let mut lines = vec![format!("generator: gsdelay {}", env!("CARGO_PKG_VERSION"))];
    for g in &scenario.designs {
        lines.push(format!(
            "design {}: {}",
            g.spacing,
            serde_json::to_string(&g.spec)?
        ));
    }
    lines.push(format!(
        "patterns: {}",
        serde_json::to_string(&scenario.patterns)?
    ));
    lines.push(format!(
        "t_max: {}; m: {:?}; m_interim: {}",
        scenario.t_max, scenario.delays, scenario.interim_overhead
    ));
    Ok(lines)
}
