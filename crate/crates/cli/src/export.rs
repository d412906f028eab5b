//! CSV and JSON trajectory files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use fabric_core::simulation::Trajectory;
use fabric_core::{Accel, State, Vector};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StateDoc {
    q: Vec<f64>,
    qd: Vec<f64>,
}

/// JSON layout; mirrors [`Trajectory`] field for field.
#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryDoc {
    dt: f64,
    times: Vec<f64>,
    states: Vec<StateDoc>,
    accels: Vec<Vec<f64>>,
    energies: Vec<f64>,
    total_energies: Option<Vec<f64>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_csv<W: Write>(traj: &Trajectory, mut w: W) -> std::io::Result<()> {
    let n = traj.dim();
    let mut header = vec!["t".to_string()];
    for prefix in ["q", "qd", "qdd"] {
        header.extend((0..n).map(|i| format!("{prefix}_{i}")));
    }
    header.push("L".into());
    header.push("H".into());
    writeln!(w, "{}", header.join(","))?;

    let num = |x: f64| format!("{x:.16e}");
    for k in 0..traj.len() {
        let s = &traj.states[k];
        let mut row = Vec::with_capacity(3 * n + 3);
        row.push(num(traj.times[k]));
        row.extend(s.q.iter().map(|x| num(*x)));
        row.extend(s.qd.iter().map(|x| num(*x)));
        row.extend(traj.accels[k].iter().map(|x| num(*x)));
        row.push(traj.energies.get(k).map_or(String::new(), |x| num(*x)));
        row.push(traj.total_energies.as_ref().map_or(String::new(), |h| num(h[k])));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn to_json(traj: &Trajectory) -> String {
    let doc = TrajectoryDoc {
        dt: traj.dt,
        times: traj.times.clone(),
        states: traj
            .states
            .iter()
            .map(|s| StateDoc {
                q: s.q.as_slice().to_vec(),
                qd: s.qd.as_slice().to_vec(),
            })
            .collect(),
        accels: traj.accels.iter().map(|a| a.as_slice().to_vec()).collect(),
        energies: traj.energies.clone(),
        total_energies: traj.total_energies.clone(),
    };
    serde_json::to_string(&doc).expect("trajectory serializes")
}

pub fn from_json(text: &str) -> Result<Trajectory> {
    let doc: TrajectoryDoc = serde_json::from_str(text).map_err(|e| HarnessError::Parse {
        path: "trajectory".into(),
        message: e.to_string(),
    })?;
    let states = doc
        .states
        .into_iter()
        .map(|s| State {
            q: Vector::from_vec(s.q),
            qd: Vector::from_vec(s.qd),
        })
        .collect();
    let traj = Trajectory {
        dt: doc.dt,
        times: doc.times,
        states,
        accels: doc.accels.into_iter().map(|a| Accel(Vector::from_vec(a))).collect(),
        energies: doc.energies,
        total_energies: doc.total_energies,
    };
    traj.validate().map_err(|e| HarnessError::validation("trajectory", e.to_string()))?;
    Ok(traj)
}

pub fn export_trajectory(traj: &Trajectory, path: &Path, format: Format) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    match format {
        Format::Csv => write_csv(traj, &mut w).map_err(io_err(path))?,
        Format::Json => w.write_all(to_json(traj).as_bytes()).map_err(io_err(path))?,
    }
    w.flush().map_err(io_err(path))
}

pub fn import_trajectory(path: &Path) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    from_json(&text)
}
