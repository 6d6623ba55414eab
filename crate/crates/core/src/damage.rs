//! Damage generators: frozen stripe patterns and seeded random damage.
//!
//! Every generator paints the selected cells with a uniform grey value
//! (mid-grey `phi = 0` by default) and returns the matching inpainting mask;
//! unselected cells are left bit-identical.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{InpaintMask, PhaseField};

/// The four frozen stripe patterns for 28x28 digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Variant {
    A,
    B,
    C,
    D,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(Variant::A),
            "b" | "B" => Ok(Variant::B),
            "c" | "C" => Ok(Variant::C),
            "d" | "D" => Ok(Variant::D),
            other => Err(Error::InvalidParam(format!(
                "unknown variant '{other}' (expected one of a, b, c, d)"
            ))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let c = match self {
            Variant::A => 'A',
            Variant::B => 'B',
            Variant::C => 'C',
            Variant::D => 'D',
        };
        write!(f, "{c}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// A full-width or full-height band of damaged cells.
///
/// `start` is the first damaged row (horizontal) or column (vertical) and
/// `thickness` how many consecutive lines the band covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Stripe {
    pub orientation: Orientation,
    pub start: usize,
    pub thickness: usize,
}

impl Stripe {
    pub fn horizontal(start: usize, thickness: usize) -> Self {
        Self {
            orientation: Orientation::Horizontal,
            start,
            thickness,
        }
    }

    pub fn vertical(start: usize, thickness: usize) -> Self {
        Self {
            orientation: Orientation::Vertical,
            start,
            thickness,
        }
    }
}

/// Parse stripes from a compact text form, e.g. `"h:11:9,v:3:2"`
/// (orientation:start:thickness, comma separated).
pub fn parse_stripes(text: &str) -> Result<Vec<Stripe>> {
    text.split(',')
        .map(|part| {
            let fields: Vec<&str> = part.trim().split(':').collect();
            let bad = || Error::InvalidParam(format!("bad stripe '{part}', expected o:start:thickness"));
            if fields.len() != 3 {
                return Err(bad());
            }
            let orientation = match fields[0] {
                "h" | "H" => Orientation::Horizontal,
                "v" | "V" => Orientation::Vertical,
                _ => return Err(bad()),
            };
            let start = fields[1].parse().map_err(|_| bad())?;
            let thickness = fields[2].parse().map_err(|_| bad())?;
            Ok(Stripe {
                orientation,
                start,
                thickness,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DamageKind {
    /// One of the frozen 28x28 patterns A-D.
    Customized(Variant),
    /// Explicit stripe geometry (the override form for non-28x28 grids).
    Stripes(Vec<Stripe>),
    /// `count` whole rows, sampled uniformly without replacement.
    RandomRows { count: usize },
    /// `round(fraction * cells)` individual cells, sampled uniformly
    /// without replacement.
    RandomPixels { fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DamageSpec {
    pub kind: DamageKind,
    /// Phase value painted into damaged cells; 0 is mid-grey.
    pub grey_value: f64,
    pub seed: u64,
}

impl DamageSpec {
    pub fn new(kind: DamageKind) -> Self {
        Self {
            kind,
            grey_value: 0.0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_grey(mut self, grey_value: f64) -> Self {
        self.grey_value = grey_value;
        self
    }
}

/// Stripe geometry of the frozen patterns. Read off a 28x28 canvas; other
/// sizes must pass explicit stripes ([`DamageKind::Stripes`]).
///
/// The masked-cell counts order D < A < B < C, with C a single thick
/// horizontal band through the digit center.
pub fn customized_variant_geometry(variant: Variant, nx: usize, ny: usize) -> Result<Vec<Stripe>> {
    if nx != 28 || ny != 28 {
        return Err(Error::InvalidParam(format!(
            "customized variants are defined on 28x28 grids; \
             pass explicit stripes for {nx}x{ny}"
        )));
    }
    Ok(match variant {
        Variant::A => vec![Stripe::vertical(10, 6)],
        Variant::B => vec![Stripe::horizontal(8, 7)],
        Variant::C => vec![Stripe::horizontal(11, 9)],
        Variant::D => vec![Stripe::horizontal(22, 4)],
    })
}

fn stripe_cells(stripes: &[Stripe], nx: usize, ny: usize) -> Result<Vec<usize>> {
    let mut cells = Vec::new();
    for s in stripes {
        if s.thickness == 0 {
            return Err(Error::InvalidParam("stripe thickness must be positive".into()));
        }
        let extent = match s.orientation {
            Orientation::Horizontal => ny,
            Orientation::Vertical => nx,
        };
        if s.start + s.thickness > extent {
            return Err(Error::InvalidParam(format!(
                "stripe {}..{} exceeds extent {extent}",
                s.start,
                s.start + s.thickness
            )));
        }
        match s.orientation {
            Orientation::Horizontal => {
                for j in s.start..s.start + s.thickness {
                    for i in 0..nx {
                        cells.push(j * nx + i);
                    }
                }
            }
            Orientation::Vertical => {
                for i in s.start..s.start + s.thickness {
                    for j in 0..ny {
                        cells.push(j * nx + i);
                    }
                }
            }
        }
    }
    cells.sort_unstable();
    cells.dedup();
    Ok(cells)
}

/// Damaged cell indices for a spec on an `nx x ny` grid.
fn damaged_cells(spec: &DamageSpec, nx: usize, ny: usize) -> Result<Vec<usize>> {
    match &spec.kind {
        DamageKind::Customized(variant) => {
            stripe_cells(&customized_variant_geometry(*variant, nx, ny)?, nx, ny)
        }
        DamageKind::Stripes(stripes) => {
            if stripes.is_empty() {
                return Err(Error::InvalidParam("empty stripe list".into()));
            }
            stripe_cells(stripes, nx, ny)
        }
        DamageKind::RandomRows { count } => {
            if *count > ny {
                return Err(Error::InvalidParam(format!(
                    "cannot damage {count} rows of a grid with {ny}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let rows = sample(&mut rng, ny, *count);
            let mut cells = Vec::with_capacity(count * nx);
            for j in rows {
                for i in 0..nx {
                    cells.push(j * nx + i);
                }
            }
            Ok(cells)
        }
        DamageKind::RandomPixels { fraction } => {
            if !(0.0..=1.0).contains(fraction) {
                return Err(Error::InvalidParam(format!(
                    "pixel fraction must be in [0, 1], got {fraction}"
                )));
            }
            let total = nx * ny;
            let k = (fraction * total as f64).round() as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            Ok(sample(&mut rng, total, k).into_vec())
        }
    }
}

/// Paint the damage onto a copy of `image` and return it with its mask.
pub fn apply_damage(image: &PhaseField, spec: &DamageSpec) -> Result<(PhaseField, InpaintMask)> {
    if !spec.grey_value.is_finite() {
        return Err(Error::InvalidParam("grey value must be finite".into()));
    }
    let (nx, ny) = (image.nx(), image.ny());
    let cells = damaged_cells(spec, nx, ny)?;
    let mut values = image.values().to_vec();
    let mut damaged = vec![false; nx * ny];
    for &k in &cells {
        values[k] = spec.grey_value;
        damaged[k] = true;
    }
    let field = PhaseField::from_values(nx, ny, image.dx(), image.dy(), values)?;
    let mask = InpaintMask::from_damaged(nx, ny, damaged)?;
    Ok((field, mask))
}
