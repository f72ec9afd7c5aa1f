//! Spatial-orbital integrals read from FCIDUMP files.
//!
//! Two-electron integrals are kept in chemist notation `(pq|rs)` with all
//! eight real permutational images stored explicitly. Indices are 0-based
//! inside the crate; the 1-based FCIDUMP convention is converted at the
//! parse boundary.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense rank-4 tensor of side `dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim.pow(4)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn offset(&self, p: usize, q: usize, r: usize, s: usize) -> usize {
        ((p * self.dim + q) * self.dim + r) * self.dim + s
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.data[self.offset(p, q, r, s)]
    }

    #[inline]
    pub fn set(&mut self, p: usize, q: usize, r: usize, s: usize, value: f64) {
        let i = self.offset(p, q, r, s);
        self.data[i] = value;
    }

    #[inline]
    pub fn add(&mut self, p: usize, q: usize, r: usize, s: usize, value: f64) {
        let i = self.offset(p, q, r, s);
        self.data[i] += value;
    }

    /// Writes `value` to all eight chemist-notation images of `(pq|rs)`.
    pub fn set_symmetric(&mut self, p: usize, q: usize, r: usize, s: usize, value: f64) {
        for [a, b, c, d] in eightfold_images(p, q, r, s) {
            self.set(a, b, c, d, value);
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Tensor4) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn axpy(&mut self, alpha: f64, other: &Tensor4) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest deviation from 8-fold chemist-notation symmetry, found by exhaustive scan.
    pub fn eightfold_violation(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let v = self.get(p, q, r, s);
                        for [a, b, c, d] in eightfold_images(p, q, r, s) {
                            worst = worst.max((self.get(a, b, c, d) - v).abs());
                        }
                    }
                }
            }
        }
        worst
    }
}

pub(crate) fn eightfold_images(p: usize, q: usize, r: usize, s: usize) -> [[usize; 4]; 8] {
    [
        [p, q, r, s],
        [q, p, r, s],
        [p, q, s, r],
        [q, p, s, r],
        [r, s, p, q],
        [s, r, p, q],
        [r, s, q, p],
        [s, r, q, p],
    ]
}

fn canonical_quad(p: usize, q: usize, r: usize, s: usize) -> [usize; 4] {
    let (a, b) = (p.max(q), p.min(q));
    let (c, d) = (r.max(s), r.min(s));
    if (a, b) >= (c, d) {
        [a, b, c, d]
    } else {
        [c, d, a, b]
    }
}

/// One- and two-electron integrals over `m` spatial orbitals.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialIntegrals {
    pub n_electrons: usize,
    pub ms2: i32,
    /// Constant energy: nuclear repulsion plus any frozen-core contribution.
    pub core_energy: f64,
    pub h1: DMatrix<f64>,
    /// Chemist-notation `(pq|rs)`.
    pub h2: Tensor4,
    pub orbital_symmetry_labels: Vec<u32>,
}

impl SpatialIntegrals {
    pub fn new(n_electrons: usize, core_energy: f64, h1: DMatrix<f64>, h2: Tensor4) -> Result<Self> {
        let m = h1.nrows();
        if h1.ncols() != m || h2.dim() != m {
            return Err(Error::Dimension {
                expected: m,
                found: h2.dim(),
            });
        }
        if m == 0 {
            return Err(Error::Unsupported("integrals over zero orbitals".into()));
        }
        if n_electrons > 2 * m {
            return Err(Error::Unsupported(format!(
                "{n_electrons} electrons do not fit in {m} spatial orbitals"
            )));
        }
        Ok(Self {
            n_electrons,
            ms2: 0,
            core_energy,
            h1,
            h2,
            orbital_symmetry_labels: vec![1; m],
        })
    }

    /// Number of spatial orbitals.
    pub fn n_orbitals(&self) -> usize {
        self.h1.nrows()
    }

    pub fn n_spin_orbitals(&self) -> usize {
        2 * self.n_orbitals()
    }

    pub fn is_finite(&self) -> bool {
        self.core_energy.is_finite()
            && self.h1.iter().all(|v| v.is_finite())
            && self.h2.as_slice().iter().all(|v| v.is_finite())
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        parse_fcidump(&text)
    }

    /// Serializes to FCIDUMP text. Only symmetry-unique nonzero entries are written.
    pub fn to_fcidump(&self) -> String {
        let m = self.n_orbitals();
        let mut out = String::new();
        let _ = writeln!(
            out,
            " &FCI NORB={m},NELEC={},MS2={},",
            self.n_electrons, self.ms2
        );
        let syms: Vec<String> = self
            .orbital_symmetry_labels
            .iter()
            .map(|s| s.to_string())
            .collect();
        let _ = writeln!(out, "  ORBSYM={},", syms.join(","));
        let _ = writeln!(out, "  ISYM=1,");
        let _ = writeln!(out, " &END");
        for p in 0..m {
            for q in 0..=p {
                for r in 0..m {
                    for s in 0..=r {
                        if p * (p + 1) / 2 + q < r * (r + 1) / 2 + s {
                            continue;
                        }
                        let v = self.h2.get(p, q, r, s);
                        if v != 0.0 {
                            let _ = writeln!(out, "{v:e} {} {} {} {}", p + 1, q + 1, r + 1, s + 1);
                        }
                    }
                }
            }
        }
        for p in 0..m {
            for q in 0..=p {
                let v = self.h1[(p, q)];
                if v != 0.0 {
                    let _ = writeln!(out, "{v:e} {} {} 0 0", p + 1, q + 1);
                }
            }
        }
        let _ = writeln!(out, "{:e} 0 0 0 0", self.core_energy);
        out
    }
}

#[derive(Default)]
struct Namelist {
    entries: Vec<(String, Vec<String>, usize)>,
}

impl Namelist {
    fn get(&self, key: &str) -> Option<&(String, Vec<String>, usize)> {
        self.entries.iter().find(|(k, _, _)| k == key)
    }

    fn scalar<T: std::str::FromStr>(&self, key: &str, end_line: usize) -> Result<T> {
        let (_, values, line) = self.get(key).ok_or_else(|| Error::Parse {
            line: end_line,
            message: format!("namelist is missing {key}"),
        })?;
        let raw = values.first().ok_or_else(|| Error::Parse {
            line: *line,
            message: format!("{key} has no value"),
        })?;
        raw.parse().map_err(|_| Error::Parse {
            line: *line,
            message: format!("cannot parse {key}={raw}"),
        })
    }
}

fn parse_float(token: &str) -> Option<f64> {
    token.replace(['D', 'd'], "E").parse().ok()
}

/// Parses FCIDUMP text.
pub fn parse_fcidump(text: &str) -> Result<SpatialIntegrals> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    // Header: everything up to and including the &END (or '/') terminator.
    let mut namelist = Namelist::default();
    let mut started = false;
    let mut end_line = 0;
    let mut terminated = false;
    for (line_no, raw) in lines.by_ref() {
        end_line = line_no;
        let mut line = raw.trim().to_string();
        if line.is_empty() {
            continue;
        }
        if !started {
            let upper = line.to_ascii_uppercase();
            if !upper.starts_with("&FCI") {
                return Err(Error::Parse {
                    line: line_no,
                    message: "expected &FCI namelist".into(),
                });
            }
            line = line[4..].to_string();
            started = true;
        }
        let upper = line.to_ascii_uppercase();
        let body = if let Some(pos) = upper.find("&END") {
            terminated = true;
            line[..pos].to_string()
        } else if line == "/" || line.ends_with('/') {
            terminated = true;
            line.trim_end_matches('/').to_string()
        } else {
            line
        };
        for piece in body.split(',') {
            let piece = piece.trim();
            if piece.is_empty() {
                continue;
            }
            if let Some((key, value)) = piece.split_once('=') {
                let key = key.trim().to_ascii_uppercase();
                if key.is_empty() || key.contains(char::is_whitespace) {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("malformed namelist entry '{piece}'"),
                    });
                }
                let values = value.split_whitespace().map(str::to_string).collect();
                namelist.entries.push((key, values, line_no));
            } else {
                let Some(last) = namelist.entries.last_mut() else {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("value '{piece}' without a key"),
                    });
                };
                last.1.extend(piece.split_whitespace().map(str::to_string));
            }
        }
        if terminated {
            break;
        }
    }
    if !started || !terminated {
        return Err(Error::Parse {
            line: end_line,
            message: "unterminated or missing &FCI namelist".into(),
        });
    }

    let norb: usize = namelist.scalar("NORB", end_line)?;
    let nelec: usize = namelist.scalar("NELEC", end_line)?;
    let ms2: i32 = namelist.scalar("MS2", end_line)?;
    if norb == 0 {
        return Err(Error::Parse {
            line: end_line,
            message: "NORB must be positive".into(),
        });
    }
    let orbsym = match namelist.get("ORBSYM") {
        Some((_, values, line)) => {
            let parsed: std::result::Result<Vec<u32>, _> = values.iter().map(|v| v.parse()).collect();
            let parsed = parsed.map_err(|_| Error::Parse {
                line: *line,
                message: "ORBSYM entries must be positive integers".into(),
            })?;
            if parsed.len() != norb {
                return Err(Error::Parse {
                    line: *line,
                    message: format!("ORBSYM has {} entries, NORB is {norb}", parsed.len()),
                });
            }
            parsed
        }
        None => vec![1; norb],
    };

    let mut h1 = DMatrix::zeros(norb, norb);
    let mut h2 = Tensor4::zeros(norb);
    let mut core_energy = 0.0;
    let mut seen: HashMap<[usize; 4], f64> = HashMap::new();

    for (line_no, raw) in lines {
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 'value i j k l', found {} fields", fields.len()),
            });
        }
        let value = parse_float(fields[0]).ok_or_else(|| Error::Parse {
            line: line_no,
            message: format!("cannot parse value '{}'", fields[0]),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                line: line_no,
                message: "non-finite integral".into(),
            });
        }
        let mut idx = [0usize; 4];
        for (slot, tok) in idx.iter_mut().zip(&fields[1..]) {
            let i: i64 = tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("cannot parse index '{tok}'"),
            })?;
            if i < 0 || i as usize > norb {
                return Err(Error::Index {
                    line: line_no,
                    index: i,
                    norb,
                });
            }
            *slot = i as usize;
        }
        let [i, j, k, l] = idx;
        let key = match (i, j, k, l) {
            (0, 0, 0, 0) => {
                core_energy = value;
                continue;
            }
            // Orbital energies; not needed.
            (_, 0, 0, 0) => continue,
            (i, j, 0, 0) if i > 0 && j > 0 => {
                let (p, q) = (i - 1, j - 1);
                h1[(p, q)] = value;
                h1[(q, p)] = value;
                [p.max(q), p.min(q), usize::MAX, usize::MAX]
            }
            (i, j, k, l) if i > 0 && j > 0 && k > 0 && l > 0 => {
                let (p, q, r, s) = (i - 1, j - 1, k - 1, l - 1);
                h2.set_symmetric(p, q, r, s, value);
                canonical_quad(p, q, r, s)
            }
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("unrecognised index pattern {i} {j} {k} {l}"),
                })
            }
        };
        if let Some(&previous) = seen.get(&key) {
            if (previous - value).abs() > 1e-10 {
                let mut indices = key;
                for v in indices.iter_mut() {
                    if *v == usize::MAX {
                        *v = 0;
                    } else {
                        *v += 1;
                    }
                }
                return Err(Error::Consistency {
                    line: line_no,
                    indices,
                    previous,
                    value,
                });
            }
        }
        seen.insert(key, value);
    }

    let mut ints = SpatialIntegrals::new(nelec, core_energy, h1, h2).map_err(|e| Error::Parse {
        line: end_line,
        message: e.to_string(),
    })?;
    ints.ms2 = ms2;
    ints.orbital_symmetry_labels = orbsym;
    Ok(ints)
}

/// Disjoint groups of 1-based spatial-orbital indices that may mix under rotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct SymmetryGroups {
    pub groups: Vec<Vec<usize>>,
}

impl SymmetryGroups {
    pub fn new(groups: Vec<Vec<usize>>) -> Self {
        Self { groups }
    }

    /// Checks disjointness and range against `n_orbitals`.
    pub fn validate(&self, n_orbitals: usize) -> Result<()> {
        let mut owner = vec![None; n_orbitals + 1];
        for (g, group) in self.groups.iter().enumerate() {
            for &idx in group {
                if idx == 0 || idx > n_orbitals {
                    return Err(Error::Group(format!(
                        "orbital {idx} in group {} is outside 1..={n_orbitals}",
                        g + 1
                    )));
                }
                if let Some(other) = owner[idx] {
                    return Err(Error::Group(format!(
                        "orbital {idx} appears in groups {} and {}",
                        other + 1,
                        g + 1
                    )));
                }
                owner[idx] = Some(g);
            }
        }
        Ok(())
    }

    /// Groups converted to 0-based indices, singletons dropped.
    pub fn rotatable(&self) -> Vec<Vec<usize>> {
        self.groups
            .iter()
            .filter(|g| g.len() > 1)
            .map(|g| g.iter().map(|i| i - 1).collect())
            .collect()
    }

    /// Number of orbitals belonging to groups with at least two members.
    pub fn n_rotated_orbitals(&self) -> usize {
        self.rotatable().iter().map(Vec::len).sum()
    }
}

pub fn validate_symmetry_groups(groups: &SymmetryGroups, ints: &SpatialIntegrals) -> Result<()> {
    groups.validate(ints.n_orbitals())
}

/// Reference energies shipped next to each fixture (electronic, core excluded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEnergies {
    pub fci: f64,
    pub vqe: f64,
    pub wahtor: f64,
    pub delta: Option<f64>,
}

/// Sidecar metadata accompanying a fixture FCIDUMP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeMetadata {
    pub molecule: String,
    pub geometry: String,
    pub basis: String,
    pub n_qubits: usize,
    #[serde(default)]
    pub n_frozen_core: usize,
    pub symmetry_groups: SymmetryGroups,
    #[serde(default)]
    pub orbital_irreps: Vec<String>,
    pub ansatz_depth: usize,
    pub hf_electronic_energy: f64,
    pub reference: ReferenceEnergies,
}

impl MoleculeMetadata {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
