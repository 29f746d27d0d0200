//! Electrode montages: names plus unit-sphere coordinates.
//!
//! Text format, one electrode per line: `NAME x y z`. Blank lines and
//! anything after `#` are ignored.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

const STANDARD_64: &str = include_str!("../data/standard_64.txt");
const STANDARD_62: &str = include_str!("../data/standard_62.txt");

const SUBSET_32: [&str; 32] = [
    "Fp1", "Fp2", "Af3", "Af4", "F7", "F3", "Fz", "F4", "F8", "Fc5", "Fc1", "Fc2", "Fc6", "T7",
    "C3", "Cz", "C4", "T8", "Cp5", "Cp1", "Cp2", "Cp6", "P7", "P3", "Pz", "P4", "P8", "Po3", "Po4",
    "O1", "Oz", "O2",
];
const SUBSET_16: [&str; 16] = [
    "Fp1", "Fp2", "F7", "F3", "F4", "F8", "T7", "C3", "C4", "T8", "P7", "P3", "P4", "P8", "O1",
    "O2",
];
const SUBSET_6: [&str; 6] = ["F3", "F4", "C3", "C4", "P3", "P4"];

/// Names accepted by [`ElectrodeMontage::builtin`].
pub const BUILTIN_MONTAGES: [&str; 5] =
    ["standard_64", "standard_62", "standard_32", "standard_16", "toy_6"];

#[derive(Debug, Clone, PartialEq)]
pub struct Electrode {
    pub name: String,
    pub pos: [f64; 3],
}

/// Ordered electrodes; the order is the canonical channel order of every
/// data array recorded with this montage.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeMontage {
    electrodes: Vec<Electrode>,
}

impl ElectrodeMontage {
    /// Validates unique names and unit-norm positions (±1e-6).
    pub fn new(electrodes: Vec<Electrode>) -> Result<Self> {
        if electrodes.is_empty() {
            return Err(Error::invalid("montage has no electrodes"));
        }
        let mut seen = HashSet::new();
        for e in &electrodes {
            if e.name.is_empty() || e.name.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!("bad electrode name {:?}", e.name)));
            }
            if !seen.insert(e.name.to_ascii_lowercase()) {
                return Err(Error::invalid(format!("duplicate electrode {}", e.name)));
            }
            let norm = e.pos.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(format!(
                    "electrode {} has norm {norm}, expected unit sphere",
                    e.name
                )));
            }
        }
        // tabulated coordinates are rounded; project them back onto the sphere
        let electrodes = electrodes
            .into_iter()
            .map(|e| {
                let norm = e.pos.iter().map(|v| v * v).sum::<f64>().sqrt();
                Electrode {
                    pos: e.pos.map(|v| v / norm),
                    ..e
                }
            })
            .collect();
        Ok(ElectrodeMontage { electrodes })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut electrodes = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::Format(format!(
                    "montage line {}: expected `NAME x y z`",
                    lineno + 1
                )));
            }
            let mut pos = [0.0; 3];
            for (slot, f) in pos.iter_mut().zip(&fields[1..]) {
                *slot = f.parse().map_err(|_| {
                    Error::Format(format!("montage line {}: bad number {f:?}", lineno + 1))
                })?;
            }
            electrodes.push(Electrode {
                name: fields[0].to_string(),
                pos,
            });
        }
        Self::new(electrodes)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        self.electrodes
            .iter()
            .map(|e| format!("{} {:.9} {:.9} {:.9}\n", e.name, e.pos[0], e.pos[1], e.pos[2]))
            .collect()
    }

    /// One of [`BUILTIN_MONTAGES`].
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "standard_64" => Self::parse(STANDARD_64),
            "standard_62" => Self::parse(STANDARD_62),
            "standard_32" => Self::parse(STANDARD_64)?.subset(&SUBSET_32),
            "standard_16" => Self::parse(STANDARD_64)?.subset(&SUBSET_16),
            "toy_6" => Self::parse(STANDARD_64)?.subset(&SUBSET_6),
            other => Err(Error::Config(format!(
                "unknown montage {other:?} (builtins: {})",
                BUILTIN_MONTAGES.join(", ")
            ))),
        }
    }

    /// Builtin name or a path to a montage text file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if BUILTIN_MONTAGES.contains(&name_or_path) {
            Self::builtin(name_or_path)
        } else {
            Self::from_file(name_or_path)
        }
    }

    /// New montage with the named electrodes, in the order given.
    pub fn subset(&self, names: &[&str]) -> Result<Self> {
        let electrodes = names
            .iter()
            .map(|n| {
                self.index_of(n)
                    .map(|i| self.electrodes[i].clone())
                    .ok_or_else(|| Error::invalid(format!("no electrode named {n}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(electrodes)
    }

    pub fn len(&self) -> usize {
        self.electrodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.electrodes.is_empty()
    }

    pub fn electrodes(&self) -> &[Electrode] {
        &self.electrodes
    }

    pub fn position(&self, i: usize) -> [f64; 3] {
        self.electrodes[i].pos
    }

    pub fn name(&self, i: usize) -> &str {
        &self.electrodes[i].name
    }

    /// Case-insensitive lookup.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.electrodes
            .iter()
            .position(|e| e.name.eq_ignore_ascii_case(name))
    }

    /// Cosine of the angle between electrodes `i` and `j`.
    pub fn cos_angle(&self, i: usize, j: usize) -> f64 {
        cos_angle(self.position(i), self.position(j))
    }

    /// Great-circle distance on the unit sphere.
    pub fn great_circle(&self, i: usize, j: usize) -> f64 {
        great_circle(self.position(i), self.position(j))
    }
}

pub fn cos_angle(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0)
}

/// Angle between `a` and `b`; `atan2` keeps nearby points accurate.
pub fn great_circle(a: [f64; 3], b: [f64; 3]) -> f64 {
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let sin = cross.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    sin.atan2(cos)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid() {
        let sizes = [64, 62, 32, 16, 6];
        for (name, n) in BUILTIN_MONTAGES.iter().zip(sizes) {
            let m = ElectrodeMontage::builtin(name).unwrap();
            assert_eq!(m.len(), n, "{name}");
        }
    }

    #[test]
    fn parse_handles_comments_and_rejects_junk() {
        let m = ElectrodeMontage::parse("# header\nA 1 0 0 # right\n\nB 0 0 1\n").unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.index_of("b"), Some(1));
        assert!(ElectrodeMontage::parse("A 1 0\n").is_err());
        assert!(ElectrodeMontage::parse("A 2 0 0\n").is_err());
        assert!(ElectrodeMontage::parse("A 1 0 0\na 0 1 0\n").is_err());
        assert!(ElectrodeMontage::parse("").is_err());
    }

    #[test]
    fn text_round_trip() {
        let m = ElectrodeMontage::builtin("standard_16").unwrap();
        let back = ElectrodeMontage::parse(&m.to_text()).unwrap();
        assert_eq!(back.len(), 16);
        for i in 0..16 {
            assert_eq!(back.name(i), m.name(i));
            assert!(great_circle(back.position(i), m.position(i)) < 1e-6);
        }
    }
}
