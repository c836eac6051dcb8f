//! CSV import/export for demonstrations and embeddings.

use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tdrp::Encoder;
use crate::{Trajectory, Vector};

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

fn parse_row(path: &Path, record: &csv::StringRecord, line: usize) -> Result<Vector> {
    record
        .iter()
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("{}:{line}: bad number `{f}`", path.display())))
        })
        .collect()
}

/// Raw states, one per row, no header.
pub fn read_states(path: &Path) -> Result<Vec<Vector>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let state = parse_row(path, &rec, i + 1)?;
        if let Some(first) = out.first().map(Vec::len) {
            if state.len() != first {
                return Err(Error::Parse(format!("{}:{}: ragged row", path.display(), i + 1)));
            }
        }
        out.push(state);
    }
    Ok(out)
}

pub fn write_states(path: &Path, states: &[Vector]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    for s in states {
        w.serialize(s).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Trajectory states as `episode,t,s_0..s_{d-1}` rows with a header.
pub fn write_trajectories(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    let dim = trajectories.first().map_or(0, |t| t.states[0].len());
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["episode".to_string(), "t".to_string()];
    header.extend((0..dim).map(|i| format!("s_{i}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (ep, traj) in trajectories.iter().enumerate() {
        for (t, s) in traj.states.iter().enumerate() {
            w.serialize((ep, t, s)).map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Inverse of [`write_trajectories`]; only states are recovered.
pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut episodes: Vec<Vec<Vector>> = Vec::new();
    let mut last: Option<u64> = None;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = parse_row(path, &rec, i + 2)?;
        if row.len() < 3 {
            return Err(Error::Parse(format!("{}:{}: too few columns", path.display(), i + 2)));
        }
        let ep = row[0] as u64;
        if last != Some(ep) {
            episodes.push(Vec::new());
            last = Some(ep);
        }
        episodes.last_mut().unwrap().push(row[2..].to_vec());
    }
    Ok(episodes.into_iter().map(Trajectory::from_states).collect())
}

/// `trajectory_id,t,emb_0..emb_{d-1}` for every state of every trajectory.
pub fn export_embeddings(path: &Path, encoder: &Encoder, trajectories: &[&Trajectory]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["trajectory_id".to_string(), "t".to_string()];
    header.extend((0..encoder.embedding_dim()).map(|i| format!("emb_{i}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (id, traj) in trajectories.iter().enumerate() {
        for (t, s) in traj.states.iter().enumerate() {
            w.serialize((id, t, encoder.encode(s)?)).map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
