//! Plain JSON and CSV artifacts.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tubeid_core::plant::Dataset;
use tubeid_core::polytope::SymPolytope;
use tubeid_core::scp::IterRecord;
use tubeid_core::tube_mpc::Trajectory;

use crate::error::{Failure, Stage};

fn io_err(stage: Stage, path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::bad_input(stage, format!("{}: {e}", path.display()))
}

pub fn write_json<T: Serialize>(stage: Stage, path: &Path, value: &T) -> Result<(), Failure> {
    let f = File::create(path).map_err(|e| io_err(stage, path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(stage, path, e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| io_err(stage, path, e))
}

pub fn read_json<T: DeserializeOwned>(stage: Stage, path: &Path) -> Result<T, Failure> {
    let f = File::open(path).map_err(|e| io_err(stage, path, format!("missing input ({e})")))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| io_err(stage, path, e))
}

fn csv_writer(stage: Stage, path: &Path) -> Result<csv::Writer<File>, Failure> {
    csv::Writer::from_path(path).map_err(|e| io_err(stage, path, e))
}

fn write_rows<R: Serialize>(stage: Stage, path: &Path, rows: impl IntoIterator<Item = R>) -> Result<(), Failure> {
    let mut w = csv_writer(stage, path)?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(stage, path, e))?;
    }
    w.flush().map_err(|e| io_err(stage, path, e))
}

#[derive(Serialize, Deserialize)]
struct DataRow {
    t: usize,
    x1: f64,
    x2: f64,
    u: f64,
}

/// Header `t,x1,x2,u`; `t` is the sample index.
pub fn write_dataset(stage: Stage, path: &Path, d: &Dataset) -> Result<(), Failure> {
    write_rows(
        stage,
        path,
        d.states.iter().zip(&d.inputs).enumerate().map(|(t, (x, u))| DataRow {
            t,
            x1: x[0],
            x2: x[1],
            u: u[0],
        }),
    )
}

pub fn read_dataset(stage: Stage, path: &Path, seed: u64) -> Result<Dataset, Failure> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(stage, path, format!("missing input ({e})")))?;
    let mut states = Vec::new();
    let mut inputs = Vec::new();
    for (k, row) in r.deserialize::<DataRow>().enumerate() {
        let row = row.map_err(|e| io_err(stage, path, e))?;
        if row.t != k {
            return Err(io_err(stage, path, format!("row {k} has t = {}", row.t)));
        }
        states.push(vec![row.x1, row.x2]);
        inputs.push(vec![row.u]);
    }
    Ok(Dataset { states, inputs, seed })
}

#[derive(Serialize)]
struct IterRow {
    iter: usize,
    objective: f64,
    b1: f64,
    eps1: f64,
    r: f64,
    status: String,
    time: f64,
}

pub fn write_iterations(stage: Stage, path: &Path, recs: &[IterRecord]) -> Result<(), Failure> {
    write_rows(
        stage,
        path,
        recs.iter().map(|r| IterRow {
            iter: r.iter,
            objective: r.objective,
            b1: r.b_tube_norm1,
            eps1: r.eps_norm1,
            r: r.r_perf,
            status: format!("{:?}", r.status),
            time: r.solve_time,
        }),
    )
}

#[derive(Serialize)]
struct TrajCsvRow {
    t: usize,
    x1: f64,
    x2: f64,
    u: f64,
    xhat1: f64,
    xhat2: f64,
    feasible: bool,
    #[serde(rename = "w_in_W")]
    w_in_w: bool,
}

pub fn write_trajectory(stage: Stage, path: &Path, tr: &Trajectory) -> Result<(), Failure> {
    write_rows(
        stage,
        path,
        tr.rows.iter().map(|r| TrajCsvRow {
            t: r.t,
            x1: r.x[0],
            x2: r.x[1],
            u: r.u[0],
            xhat1: r.xhat[0],
            xhat2: r.xhat[1],
            feasible: r.feasible,
            w_in_w: r.w_in_W,
        }),
    )
}

/// Counter-clockwise vertex list, header `x1,x2`.
pub fn write_vertices(stage: Stage, path: &Path, p: &SymPolytope) -> Result<(), Failure> {
    let verts = p
        .vertices_2d()
        .map_err(|e| Failure::bad_input(stage, format!("{}: {e}", path.display())))?;
    #[derive(Serialize)]
    struct V {
        x1: f64,
        x2: f64,
    }
    write_rows(stage, path, verts.iter().map(|v| V { x1: v[0], x2: v[1] }))
}

pub fn write_text(stage: Stage, path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| io_err(stage, path, e))
}
