//! Backbone extraction from fixed-width PDB `ATOM` records and a minimal writer.

use std::fmt::Write as _;

use crate::backbone::{BackboneCoords, BackboneResidue};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

const BACKBONE_ATOMS: [&str; 4] = ["N", "CA", "C", "O"];

#[derive(Debug)]
struct PartialResidue {
    key: (i32, char),
    line: usize,
    atoms: [Option<Vec3>; 4],
}

fn column(line: &str, start: usize, end: usize) -> Option<&str> {
    line.get(start - 1..end.min(line.len()))
}

fn coordinate(line: &str, line_no: usize, start: usize) -> Result<f64> {
    let field = line.get(start - 1..start + 7).ok_or_else(|| Error::MalformedRecord {
        line: line_no,
        reason: format!("record too short for coordinate columns {}-{}", start, start + 7),
    })?;
    field.trim().parse().map_err(|_| Error::MalformedRecord {
        line: line_no,
        reason: format!("bad coordinate {:?} in columns {}-{}", field, start, start + 7),
    })
}

/// Reads N, CA, C and O of the selected chain (the first one seen when `chain_id`
/// is `None`) from the first model, keeping the first alternate location of each atom.
pub fn parse_pdb_backbone(text: &str, chain_id: Option<char>) -> Result<BackboneCoords> {
    let mut chain = chain_id;
    let mut residues: Vec<PartialResidue> = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.starts_with("ENDMDL") {
            break;
        }
        if !line.starts_with("ATOM  ") {
            continue;
        }
        if line.len() < 54 {
            return Err(Error::MalformedRecord {
                line: line_no,
                reason: format!("ATOM record has {} columns, need 54", line.len()),
            });
        }
        let this_chain = column(line, 22, 22).and_then(|s| s.chars().next()).unwrap_or(' ');
        match chain {
            None => chain = Some(this_chain),
            Some(c) if c != this_chain => continue,
            Some(_) => {}
        }
        let name = column(line, 13, 16).unwrap_or("").trim();
        let Some(slot) = BACKBONE_ATOMS.iter().position(|a| *a == name) else {
            continue;
        };
        let seq_field = column(line, 23, 26).unwrap_or("");
        let seq: i32 = seq_field.trim().parse().map_err(|_| Error::MalformedRecord {
            line: line_no,
            reason: format!("bad residue number {seq_field:?}"),
        })?;
        let icode = column(line, 27, 27).and_then(|s| s.chars().next()).unwrap_or(' ');
        let pos = Vec3::new(
            coordinate(line, line_no, 31)?,
            coordinate(line, line_no, 39)?,
            coordinate(line, line_no, 47)?,
        );

        let key = (seq, icode);
        if residues.last().map(|r| r.key) != Some(key) {
            residues.push(PartialResidue {
                key,
                line: line_no,
                atoms: [None; 4],
            });
        }
        let res = residues.last_mut().expect("pushed above");
        // later alternate locations of an atom already seen are ignored
        if res.atoms[slot].is_none() {
            res.atoms[slot] = Some(pos);
        }
    }

    if residues.is_empty() {
        return Err(Error::EmptyChain);
    }
    let complete = residues
        .iter()
        .enumerate()
        .map(|(index, r)| {
            let get = |k: usize| {
                r.atoms[k].ok_or(Error::IncompleteResidue {
                    index,
                    line: r.line,
                    missing: BACKBONE_ATOMS[k],
                })
            };
            Ok(BackboneResidue {
                n: get(0)?,
                ca: get(1)?,
                c: get(2)?,
                o: get(3)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    BackboneCoords::new(complete)
}

/// Minimal PDB text: one glycine per residue, chain A, then `TER` and `END`.
pub fn write_pdb(coords: &BackboneCoords) -> String {
    let mut out = String::new();
    let mut serial = 1;
    for (i, res) in coords.residues.iter().enumerate() {
        for (name, p) in BACKBONE_ATOMS.iter().zip(res.atoms()) {
            let element = &name[..1];
            writeln!(
                out,
                "ATOM  {:>5} {:<4} GLY A{:>4}    {:>8.3}{:>8.3}{:>8.3}  1.00  0.00          {:>2}",
                serial,
                format!(" {name}"),
                i + 1,
                p.x,
                p.y,
                p.z,
                element
            )
            .expect("writing to a String cannot fail");
            serial += 1;
        }
    }
    let last = coords.len();
    writeln!(out, "TER   {:>5}      GLY A{:>4}", serial, last).expect("infallible");
    out.push_str("END\n");
    out
}
