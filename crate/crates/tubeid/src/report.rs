//! Comparison table, problem sizes and vertex dumps for plotting.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use tubeid_core::cone::ProblemSize;

use crate::error::{Failure, Stage};
use crate::io;
use crate::pipeline::{termination_label, Artifacts, InitArtifact, Mode, SynthArtifact, INIT};

/// Totals quoted alongside the example for comparison; the assembled counts
/// are authoritative.
pub const REFERENCE_LMI_ROWS: usize = 1086;
pub const REFERENCE_INEQUALITIES: usize = 20275;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub run: String,
    pub b_tube_norm1: f64,
    pub eps_norm1: f64,
    pub r_perf: f64,
    pub objective: f64,
    pub iterations: usize,
    pub termination: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub run: String,
    pub assembled: ProblemSize,
    pub formula: ProblemSize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub theta: f64,
    pub table: Vec<TableRow>,
    pub sizes: Vec<SizeRow>,
}

fn synth_row(s: &SynthArtifact) -> TableRow {
    let it = &s.report.final_iterate;
    TableRow {
        run: match s.mode {
            Mode::Adaptive => "Adapt".into(),
            Mode::Fixed => "Fix".into(),
        },
        b_tube_norm1: it.b_tube.sum(),
        eps_norm1: it.eps_cover.sum(),
        r_perf: it.r_perf,
        objective: s.report.final_objective(),
        iterations: s.report.records.len() - 1,
        termination: termination_label(s.report.termination).into(),
    }
}

pub fn build_report(init: &InitArtifact, synths: &[SynthArtifact]) -> Report {
    let it = &init.iterate;
    let mut table = vec![TableRow {
        run: "Initial".into(),
        b_tube_norm1: it.b_tube.sum(),
        eps_norm1: it.eps_cover.sum(),
        r_perf: it.r_perf,
        objective: init.report.objective,
        iterations: 0,
        termination: String::new(),
    }];
    table.extend(synths.iter().map(synth_row));
    let sizes = synths
        .iter()
        .filter_map(|s| {
            s.report.problem_size.map(|assembled| SizeRow {
                run: s.mode.tag().into(),
                assembled,
                formula: s.size_formula,
            })
        })
        .collect();
    Report {
        seed: init.seed,
        theta: init.theta,
        table,
        sizes,
    }
}

pub fn markdown(r: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Synthesis summary (seed {}, theta {:e})\n", r.seed, r.theta);
    let _ = writeln!(s, "| Run | ‖b̲‖₁ | ‖ε̄‖₁ | r̃ | objective | iterations |");
    let _ = writeln!(s, "|---|---:|---:|---:|---:|---:|");
    for t in &r.table {
        let _ = writeln!(
            s,
            "| {} | {:.3} | {:.3} | {:.3} | {:.4} | {} |",
            t.run, t.b_tube_norm1, t.eps_norm1, t.r_perf, t.objective, t.iterations
        );
    }
    if !r.sizes.is_empty() {
        let _ = writeln!(s, "\n## Problem size per iteration\n");
        let _ = writeln!(s, "| Run | variables | LMI rows | PSD blocks | inequalities | equalities | sign bounds | formula agrees |");
        let _ = writeln!(s, "|---|---:|---:|---:|---:|---:|---:|---|");
        for z in &r.sizes {
            let a = &z.assembled;
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} | {} |",
                z.run,
                a.scalar_variables,
                a.lmi_rows,
                a.psd_blocks,
                a.inequalities,
                a.equalities,
                a.bounds,
                if z.assembled == z.formula { "yes" } else { "NO" }
            );
        }
        let _ = writeln!(
            s,
            "\nReference totals for this example are {REFERENCE_LMI_ROWS} LMI rows and {REFERENCE_INEQUALITIES} \
             inequalities. The counts above come from the assembled program; variable sign bounds \
             (Z ≥ 0, ε̄ ≥ 0) are listed separately and not counted as inequalities."
        );
    }
    s
}

/// Writes `table.csv`, `table.md`, `report.json` and vertex CSVs for `X`,
/// and for the tube and terminal set of every available run.
pub fn emit_report(art: &Artifacts) -> Result<Report, Failure> {
    let stage = Stage::Report;
    let init: InitArtifact = io::read_json(stage, &art.path(INIT))?;
    let mut synths = Vec::new();
    for m in [Mode::Adaptive, Mode::Fixed] {
        let p = art.path(&m.synth_file());
        if p.exists() {
            synths.push(io::read_json::<SynthArtifact>(stage, &p)?);
        }
    }
    if synths.is_empty() {
        return Err(Failure::bad_input(stage, "missing input: no synth_*.json artifacts"));
    }
    let r = build_report(&init, &synths);

    let mut w = csv::Writer::from_path(art.path("table.csv")).map_err(|e| Failure::bad_input(stage, e.to_string()))?;
    for row in &r.table {
        w.serialize(row).map_err(|e| Failure::bad_input(stage, e.to_string()))?;
    }
    w.flush().map_err(|e| Failure::bad_input(stage, e.to_string()))?;
    io::write_text(stage, &art.path("table.md"), &markdown(&r))?;
    io::write_json(stage, &art.path("report.json"), &r)?;

    let geom = |e: tubeid_core::polytope::PolytopeError| Failure::bad_input(stage, e.to_string());
    io::write_vertices(stage, &art.path("vertices_X.csv"), &init.shapes.state_set())?;
    let mut sets = vec![("initial", init.iterate.clone(), init.shapes.clone())];
    sets.extend(synths.iter().map(|s| (s.mode.tag(), s.report.final_iterate.clone(), s.shapes.clone())));
    for (tag, it, shapes) in &sets {
        io::write_vertices(stage, &art.path(&format!("vertices_tube_{tag}.csv")), &it.tube(shapes).map_err(geom)?)?;
        io::write_vertices(
            stage,
            &art.path(&format!("vertices_terminal_{tag}.csv")),
            &it.terminal(shapes).map_err(geom)?,
        )?;
    }
    Ok(r)
}
