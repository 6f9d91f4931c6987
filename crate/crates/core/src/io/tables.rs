//! CSV tables: angle dumps and metric outputs.

use std::fmt::Write as _;

use crate::backbone::{AngularChain, ANGLE_NAMES};
use crate::error::{Error, Result};
use crate::metrics::{BenchRecord, CollisionProfile, EnergyPoint};

pub const ANGLES_HEADER: &str = "residue,phi,psi,omega,theta1,theta2,theta3";

/// One row per residue, radians at 17 significant digits.
pub fn angles_to_csv(chain: &AngularChain) -> String {
    let mut out = format!("{ANGLES_HEADER}\n");
    for i in 0..chain.len() {
        out.push_str(&i.to_string());
        for a in chain.residue(i) {
            write!(out, ",{a:.16e}").expect("infallible");
        }
        out.push('\n');
    }
    out
}

fn csv_error(line: usize, reason: impl Into<String>) -> Error {
    Error::MalformedRecord {
        line,
        reason: reason.into(),
    }
}

pub fn angles_from_csv(text: &str) -> Result<AngularChain> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| csv_error(1, e.to_string()))?;
    let expected: Vec<&str> = std::iter::once("residue").chain(ANGLE_NAMES).collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(csv_error(1, format!("expected header {ANGLES_HEADER}")));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| csv_error(line, e.to_string()))?;
        let index: usize = record[0]
            .parse()
            .map_err(|_| csv_error(line, format!("bad residue index {:?}", &record[0])))?;
        if index != i {
            return Err(csv_error(line, format!("residue {index} out of order, expected {i}")));
        }
        let mut row = [0.0; 6];
        for (k, slot) in row.iter_mut().enumerate() {
            *slot = record[k + 1]
                .parse()
                .map_err(|_| csv_error(line, format!("bad {} value {:?}", ANGLE_NAMES[k], &record[k + 1])))?;
        }
        rows.push(row);
    }
    AngularChain::new(&rows)
}

pub fn collisions_to_csv(profile: &CollisionProfile) -> String {
    let mut out = String::from("step,collisions\n");
    for (s, c) in profile.counts.iter().enumerate() {
        writeln!(out, "{s},{c}").expect("infallible");
    }
    out
}

pub fn energy_to_csv(points: &[EnergyPoint]) -> String {
    let mut out = String::from("step,flow_time,potential,kinetic,total\n");
    for (s, e) in points.iter().enumerate() {
        writeln!(
            out,
            "{s},{:.16e},{:.16e},{:.16e},{:.16e}",
            e.flow_time,
            e.potential,
            e.kinetic,
            e.total()
        )
        .expect("infallible");
    }
    out
}

pub fn bench_to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from("length,median_seconds\n");
    for r in records {
        writeln!(out, "{},{:.9e}", r.n_residues, r.median_seconds).expect("infallible");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_round_trip_bitwise() {
        let chain = AngularChain::new(&[
            [0.1, -2.9, 3.1, 1.9, 2.0, 2.1],
            [-1.0 / 3.0, 0.5, -3.0, 1.95, 0.0, 0.0],
        ])
        .unwrap();
        let csv = angles_to_csv(&chain);
        assert!(csv.starts_with("residue,phi,psi,omega,theta1,theta2,theta3\n"));
        assert_eq!(angles_from_csv(&csv).unwrap(), chain);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(angles_from_csv("residue,phi\n0,1\n").is_err());
        let bad = format!("{ANGLES_HEADER}\n1,0,0,0,0,0,0\n0,0,0,0,0,0,0\n");
        assert!(matches!(
            angles_from_csv(&bad),
            Err(Error::MalformedRecord { line: 2, .. })
        ));
    }
}
