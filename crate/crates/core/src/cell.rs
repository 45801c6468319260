//! Periodic reference cell Y = Y1 (pore) + Y2 (solid) on a uniform grid.
//!
//! The cell is the unit box [0,1]^d rasterized at n cells per axis: a grid
//! cell is solid iff its center lies inside the inclusion (staircase
//! rasterization, so perforated tilings of the cell are exact). Pore-solid
//! interface faces carry wall-class labels; a face inherits the class of its
//! solid cell, and classes are assigned to solid cells by axis-aligned
//! regions of cell centers (or a single default class).

use crate::error::{Error, Result};
use crate::grid::GridShape;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Inclusion {
    /// No solid phase: Y1 = Y.
    None,
    /// Solid ball; the center may sit anywhere in [0,1]^d, distances are
    /// taken modulo the periodic wrap.
    Ball { center: Vec<f64>, radius: f64 },
    /// Solid axis-aligned box with 0 <= lo <= hi <= 1 per axis.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Explicit solid mask, row-major with x fastest (see bitmap format).
    Bitmap { solid: Vec<bool> },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ClassRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub class: u16,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WallClassRule {
    /// Every interface face belongs to class 1.
    Single,
    /// First matching region (by solid-cell center) wins; unmatched solid
    /// cells fall back to `default_class`.
    Regions {
        regions: Vec<ClassRegion>,
        #[serde(default = "default_class_one")]
        default_class: u16,
    },
    /// Explicit per-cell class map (0 on pore cells, >= 1 on solid cells).
    FromMap { classes: Vec<u16> },
}

fn default_class_one() -> u16 {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CellGeometrySpec {
    pub dimension: usize,
    pub resolution: usize,
    pub inclusion: Inclusion,
    #[serde(default = "default_wall_rule")]
    pub wall_classes: WallClassRule,
}

fn default_wall_rule() -> WallClassRule {
    WallClassRule::Single
}

/// One pore-solid grid face. `side = +1` means the solid neighbor sits on
/// the +axis side of the pore cell (periodic wrap included).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InterfaceFace {
    pub pore_cell: usize,
    pub axis: u8,
    pub side: i8,
    pub class: u16,
}

#[derive(Clone, Debug)]
pub struct ReferenceCell {
    pub d: usize,
    pub n: usize,
    pub shape: GridShape,
    /// true = pore (Y1)
    pub pore: Vec<bool>,
    /// wall class per cell; 0 on pore cells
    pub cell_class: Vec<u16>,
    pub interface: Vec<InterfaceFace>,
    /// porosity |Y1|/|Y|
    pub theta1: f64,
    /// |dY1_{w_i}| indexed by class-1
    pub class_measures: Vec<f64>,
}

impl CellGeometrySpec {
    pub fn validate(&self) -> Result<()> {
        let d = self.dimension;
        if d != 2 && d != 3 {
            return Err(Error::Parameter(format!("dimension must be 2 or 3, got {d}")));
        }
        if self.resolution < 8 {
            return Err(Error::Parameter(format!(
                "resolution must be >= 8, got {}",
                self.resolution
            )));
        }
        match &self.inclusion {
            Inclusion::None => {}
            Inclusion::Ball { center, radius } => {
                if center.len() != d {
                    return Err(Error::Parameter("ball center has wrong dimension".into()));
                }
                if !(*radius > 0.0 && *radius < 0.5) {
                    return Err(Error::Parameter(format!(
                        "ball radius must lie in (0, 0.5), got {radius}"
                    )));
                }
                if center.iter().any(|c| !(0.0..=1.0).contains(c)) {
                    return Err(Error::Parameter("ball center outside [0,1]^d".into()));
                }
            }
            Inclusion::Box { lo, hi } => {
                if lo.len() != d || hi.len() != d {
                    return Err(Error::Parameter("box corners have wrong dimension".into()));
                }
                for a in 0..d {
                    if !(0.0 <= lo[a] && lo[a] <= hi[a] && hi[a] <= 1.0) {
                        return Err(Error::Parameter(format!(
                            "box corners must satisfy 0 <= lo <= hi <= 1 on axis {a}"
                        )));
                    }
                }
            }
            Inclusion::Bitmap { solid } => {
                let want = self.resolution.pow(d as u32);
                if solid.len() != want {
                    return Err(Error::Parameter(format!(
                        "bitmap has {} cells, expected {want}",
                        solid.len()
                    )));
                }
            }
        }
        if let WallClassRule::FromMap { classes } = &self.wall_classes {
            let want = self.resolution.pow(d as u32);
            if classes.len() != want {
                return Err(Error::Parameter(format!(
                    "class map has {} cells, expected {want}",
                    classes.len()
                )));
            }
        }
        Ok(())
    }
}

/// Rasterize and validate a reference cell from its spec.
pub fn build_cell(spec: &CellGeometrySpec) -> Result<ReferenceCell> {
    spec.validate()?;
    let d = spec.dimension;
    let n = spec.resolution;
    let shape = GridShape::cube(d, n);
    let h = 1.0 / n as f64;

    let mut pore = vec![true; shape.len()];
    for i in 0..shape.len() {
        let c = shape.coords(i);
        let center: [f64; 3] = [
            (c[0] as f64 + 0.5) * h,
            (c[1] as f64 + 0.5) * h,
            (c[2] as f64 + 0.5) * h,
        ];
        let solid = match &spec.inclusion {
            Inclusion::None => false,
            Inclusion::Ball { center: bc, radius } => {
                let mut dist2 = 0.0;
                for a in 0..d {
                    let mut dx = (center[a] - bc[a]).abs();
                    if dx > 0.5 {
                        dx = 1.0 - dx;
                    }
                    dist2 += dx * dx;
                }
                dist2 <= radius * radius
            }
            Inclusion::Box { lo, hi } => (0..d).all(|a| lo[a] <= center[a] && center[a] <= hi[a]),
            Inclusion::Bitmap { solid } => solid[i],
        };
        pore[i] = !solid;
    }

    let pore_count = pore.iter().filter(|p| **p).count();
    if pore_count == 0 {
        return Err(Error::Geometry("pore phase is empty (theta1 = 0)".into()));
    }
    check_pore_connectivity(&shape, d, &pore)?;

    // class per solid cell
    let mut cell_class = vec![0u16; shape.len()];
    for i in 0..shape.len() {
        if pore[i] {
            continue;
        }
        let c = shape.coords(i);
        cell_class[i] = match &spec.wall_classes {
            WallClassRule::Single => 1,
            WallClassRule::Regions { regions, default_class } => {
                let center: Vec<f64> = (0..d).map(|a| (c[a] as f64 + 0.5) * h).collect();
                regions
                    .iter()
                    .find(|r| (0..d).all(|a| r.lo[a] <= center[a] && center[a] <= r.hi[a]))
                    .map(|r| r.class)
                    .unwrap_or(*default_class)
            }
            WallClassRule::FromMap { classes } => {
                if classes[i] == 0 {
                    return Err(Error::Parameter(format!(
                        "class map assigns class 0 to solid cell {i}"
                    )));
                }
                classes[i]
            }
        };
    }

    // interface faces in deterministic cell/axis/side order
    let mut interface = Vec::new();
    let mut max_class = 0u16;
    for i in 0..shape.len() {
        if !pore[i] {
            continue;
        }
        for axis in 0..d {
            for side in [-1i8, 1i8] {
                let j = shape.wrap_neighbor(i, axis, side as isize);
                if !pore[j] {
                    let class = cell_class[j];
                    max_class = max_class.max(class);
                    interface.push(InterfaceFace {
                        pore_cell: i,
                        axis: axis as u8,
                        side,
                        class,
                    });
                }
            }
        }
    }

    let face_area = h.powi(d as i32 - 1);
    let mut class_measures = vec![0.0; max_class as usize];
    for f in &interface {
        class_measures[f.class as usize - 1] += face_area;
    }

    Ok(ReferenceCell {
        d,
        n,
        shape,
        pore,
        cell_class,
        interface,
        theta1: pore_count as f64 / shape.len() as f64,
        class_measures,
    })
}

/// The pore phase must be connected under periodic face-adjacency and must
/// percolate across the cell boundary in at least one axis, otherwise the
/// tiled pore space splits into enclosed pockets.
fn check_pore_connectivity(shape: &GridShape, d: usize, pore: &[bool]) -> Result<()> {
    let start = match pore.iter().position(|p| *p) {
        Some(i) => i,
        None => return Err(Error::Geometry("pore phase is empty".into())),
    };
    // BFS with integer lifts; a lift mismatch on a closed loop is a winding,
    // i.e. percolation along that axis.
    let mut lift: Vec<Option<[i64; 3]>> = vec![None; shape.len()];
    lift[start] = Some([0, 0, 0]);
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(start);
    let mut visited = 1usize;
    let mut winds = [false; 3];
    while let Some(i) = queue.pop_front() {
        let base = lift[i].unwrap();
        for axis in 0..d {
            for step in [-1i64, 1i64] {
                let j = shape.wrap_neighbor(i, axis, step as isize);
                if !pore[j] {
                    continue;
                }
                // lift = net displacement in cells; a revisit with a
                // different lift is a loop winding around the torus
                let mut next = base;
                next[axis] += step;
                match lift[j] {
                    None => {
                        lift[j] = Some(next);
                        visited += 1;
                        queue.push_back(j);
                    }
                    Some(prev) => {
                        for a in 0..d {
                            if prev[a] != next[a] {
                                winds[a] = true;
                            }
                        }
                    }
                }
            }
        }
    }
    let pore_count = pore.iter().filter(|p| **p).count();
    if visited != pore_count {
        return Err(Error::Geometry(format!(
            "pore phase is disconnected: reached {visited} of {pore_count} pore cells"
        )));
    }
    if !winds.iter().any(|w| *w) {
        return Err(Error::Geometry(
            "pore phase does not percolate across the periodic boundary (enclosed pocket)".into(),
        ));
    }
    Ok(())
}

impl ReferenceCell {
    pub fn porosity(&self) -> f64 {
        self.theta1
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn n_classes(&self) -> usize {
        self.class_measures.len()
    }

    /// Total pore-solid interface measure |dY1_w|.
    pub fn interface_measure(&self) -> f64 {
        self.class_measures.iter().sum()
    }

    /// theta_{w_i} = |dY1_{w_i}| / |dY1_w| for each class.
    pub fn wall_fractions(&self) -> Result<Vec<f64>> {
        let total = self.interface_measure();
        if self.interface.is_empty() || total == 0.0 {
            return Err(Error::Geometry(
                "wall fractions are undefined: the pore-solid interface is empty".into(),
            ));
        }
        Ok(self.class_measures.iter().map(|m| m / total).collect())
    }

    /// Pore mask as text: header `d n`, then one line of 0/1 digits per row
    /// (x fastest, rows over y, then z). '1' = pore.
    pub fn bitmap_text(&self) -> String {
        mask_to_text(self.d, self.n, &self.shape, |i| if self.pore[i] { '1' } else { '0' })
    }

    /// Wall-class map parallel to the bitmap: digit per cell, 0 on pore.
    /// Supports up to 9 classes in this format.
    pub fn class_map_text(&self) -> Result<String> {
        if self.n_classes() > 9 {
            return Err(Error::Parameter(
                "class map text format supports at most 9 classes".into(),
            ));
        }
        Ok(mask_to_text(self.d, self.n, &self.shape, |i| {
            char::from_digit(self.cell_class[i] as u32, 10).unwrap()
        }))
    }
}

fn mask_to_text(d: usize, n: usize, shape: &GridShape, digit: impl Fn(usize) -> char) -> String {
    let mut out = String::with_capacity(shape.len() + shape.len() / n + 16);
    out.push_str(&format!("{d} {n}\n"));
    let planes = if d == 3 { n } else { 1 };
    for z in 0..planes {
        for y in 0..n {
            for x in 0..n {
                out.push(digit(shape.index([x, y, z])));
            }
            out.push('\n');
        }
    }
    out
}

/// Parse the bitmap text format; returns (d, n, per-cell digits).
pub fn parse_digit_map(text: &str) -> Result<(usize, usize, Vec<u16>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parameter("empty bitmap".into()))?;
    let mut parts = header.split_whitespace();
    let d: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parameter("bitmap header must be `d n`".into()))?;
    let n: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parameter("bitmap header must be `d n`".into()))?;
    if d != 2 && d != 3 {
        return Err(Error::Parameter(format!("bitmap dimension must be 2 or 3, got {d}")));
    }
    let shape = GridShape::cube(d, n);
    let mut digits = vec![0u16; shape.len()];
    let planes = if d == 3 { n } else { 1 };
    for z in 0..planes {
        for y in 0..n {
            let line = lines.next().ok_or_else(|| {
                Error::Parameter(format!("bitmap truncated at row y={y}, z={z}"))
            })?;
            let row: Vec<char> = line.trim().chars().collect();
            if row.len() != n {
                return Err(Error::Parameter(format!(
                    "bitmap row y={y}, z={z} has {} digits, expected {n}",
                    row.len()
                )));
            }
            for (x, ch) in row.iter().enumerate() {
                let v = ch
                    .to_digit(10)
                    .ok_or_else(|| Error::Parameter(format!("invalid bitmap digit '{ch}'")))?;
                digits[shape.index([x, y, z])] = v as u16;
            }
        }
    }
    Ok((d, n, digits))
}

/// Rebuild a cell spec from exported bitmap (+ optional class map) text.
pub fn spec_from_bitmap(bitmap: &str, class_map: Option<&str>) -> Result<CellGeometrySpec> {
    let (d, n, digits) = parse_digit_map(bitmap)?;
    let solid: Vec<bool> = digits.iter().map(|v| *v == 0).collect();
    let wall_classes = match class_map {
        None => WallClassRule::Single,
        Some(text) => {
            let (cd, cn, classes) = parse_digit_map(text)?;
            if cd != d || cn != n {
                return Err(Error::Parameter(
                    "class map shape does not match bitmap shape".into(),
                ));
            }
            WallClassRule::FromMap { classes }
        }
    };
    Ok(CellGeometrySpec {
        dimension: d,
        resolution: n,
        inclusion: Inclusion::Bitmap { solid },
        wall_classes,
    })
}

/// Convenience constructors used across tests and the CLI.
pub fn ball_spec(d: usize, n: usize, center: &[f64], radius: f64) -> CellGeometrySpec {
    CellGeometrySpec {
        dimension: d,
        resolution: n,
        inclusion: Inclusion::Ball {
            center: center.to_vec(),
            radius,
        },
        wall_classes: WallClassRule::Single,
    }
}

pub fn trivial_spec(d: usize, n: usize) -> CellGeometrySpec {
    CellGeometrySpec {
        dimension: d,
        resolution: n,
        inclusion: Inclusion::None,
        wall_classes: WallClassRule::Single,
    }
}

/// Solid slab [0,1] x [lo,hi] (x [0,1] in 3D): pore percolates along x only.
pub fn slab_spec(d: usize, n: usize, lo: f64, hi: f64) -> CellGeometrySpec {
    let (blo, bhi) = match d {
        2 => (vec![0.0, lo], vec![1.0, hi]),
        _ => (vec![0.0, lo, 0.0], vec![1.0, hi, 1.0]),
    };
    CellGeometrySpec {
        dimension: d,
        resolution: n,
        inclusion: Inclusion::Box { lo: blo, hi: bhi },
        wall_classes: WallClassRule::Single,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trivial_cell_has_full_porosity() {
        let cell = build_cell(&trivial_spec(2, 64)).unwrap();
        assert_eq!(cell.theta1, 1.0);
        assert!(cell.interface.is_empty());
        assert!(cell.wall_fractions().is_err());
    }

    #[test]
    fn slab_porosity_is_exact_cell_count() {
        let cell = build_cell(&slab_spec(2, 100, 0.5, 0.8)).unwrap();
        assert_eq!(cell.theta1, 0.7);
        // interface: two full rows of faces, measure 2 * 1
        assert!((cell.interface_measure() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ball_porosity_matches_analytic_area() {
        let exact = 1.0 - std::f64::consts::PI * 0.09;
        let theta: Vec<f64> = [128usize, 256, 512]
            .iter()
            .map(|&n| build_cell(&ball_spec(2, n, &[0.5, 0.5], 0.3)).unwrap().theta1)
            .collect();
        assert!((theta[1] - exact).abs() < 0.01, "theta(256) = {}", theta[1]);
        // refinement shrinks the pixel-count error
        assert!((theta[2] - exact).abs() <= (theta[0] - exact).abs());
        // O(1/n) decay of the resolution differences, constant fitted on the
        // first pair
        let d1 = (theta[1] - theta[0]).abs();
        let d2 = (theta[2] - theta[1]).abs();
        let c = d1 * 128.0;
        assert!(d2 <= 2.0 * c / 256.0 + 1e-6, "d1={d1} d2={d2}");
    }

    #[test]
    fn enclosed_pocket_is_rejected() {
        // solid everywhere except a small interior pocket
        let n = 64;
        let shape = GridShape::cube(2, n);
        let mut solid = vec![true; shape.len()];
        for y in 20..24 {
            for x in 20..30 {
                solid[shape.index([x, y, 0])] = false;
            }
        }
        let spec = CellGeometrySpec {
            dimension: 2,
            resolution: n,
            inclusion: Inclusion::Bitmap { solid },
            wall_classes: WallClassRule::Single,
        };
        assert!(matches!(build_cell(&spec), Err(Error::Geometry(_))));
    }

    #[test]
    fn split_pore_is_rejected() {
        // two disjoint horizontal channels separated by solid, one of them
        // blocked: a disconnected pore graph
        let n = 16;
        let shape = GridShape::cube(2, n);
        let mut solid = vec![false; shape.len()];
        for x in 0..n {
            for y in [4usize, 12] {
                solid[shape.index([x, y, 0])] = true;
            }
        }
        // both channels percolate but are mutually disconnected
        let spec = CellGeometrySpec {
            dimension: 2,
            resolution: n,
            inclusion: Inclusion::Bitmap { solid },
            wall_classes: WallClassRule::Single,
        };
        assert!(matches!(build_cell(&spec), Err(Error::Geometry(_))));
    }

    #[test]
    fn full_solid_is_rejected() {
        let spec = CellGeometrySpec {
            dimension: 2,
            resolution: 8,
            inclusion: Inclusion::Bitmap {
                solid: vec![true; 64],
            },
            wall_classes: WallClassRule::Single,
        };
        assert!(matches!(build_cell(&spec), Err(Error::Geometry(_))));
    }

    #[test]
    fn slab_wall_classes_split_evenly() {
        // top faces class 1, bottom faces class 2 via center regions
        let spec = CellGeometrySpec {
            dimension: 2,
            resolution: 100,
            inclusion: Inclusion::Box {
                lo: vec![0.0, 0.5],
                hi: vec![1.0, 0.8],
            },
            wall_classes: WallClassRule::Regions {
                regions: vec![ClassRegion {
                    lo: vec![0.0, 0.65],
                    hi: vec![1.0, 1.0],
                    class: 1,
                }],
                default_class: 2,
            },
        };
        let cell = build_cell(&spec).unwrap();
        let fr = cell.wall_fractions().unwrap();
        assert_eq!(fr.len(), 2);
        assert!((fr[0] - 0.5).abs() < 1e-12);
        assert!((fr[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ball_left_right_classes_near_half() {
        let n = 128;
        let spec = CellGeometrySpec {
            dimension: 2,
            resolution: n,
            inclusion: Inclusion::Ball {
                center: vec![0.5, 0.5],
                radius: 0.3,
            },
            wall_classes: WallClassRule::Regions {
                regions: vec![ClassRegion {
                    lo: vec![0.0, 0.0],
                    hi: vec![0.5, 1.0],
                    class: 1,
                }],
                default_class: 2,
            },
        };
        let cell = build_cell(&spec).unwrap();
        let fr = cell.wall_fractions().unwrap();
        assert!((fr[0] - 0.5).abs() <= 1.0 / n as f64, "fr = {fr:?}");
        assert!((fr[0] + fr[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bitmap_roundtrip_reproduces_mask() {
        let cell = build_cell(&ball_spec(2, 64, &[0.4, 0.6], 0.25)).unwrap();
        let spec2 = spec_from_bitmap(
            &cell.bitmap_text(),
            Some(&cell.class_map_text().unwrap()),
        )
        .unwrap();
        let cell2 = build_cell(&spec2).unwrap();
        assert_eq!(cell.pore, cell2.pore);
        assert_eq!(cell.cell_class, cell2.cell_class);
        assert_eq!(cell.interface, cell2.interface);
        assert_eq!(cell.theta1, cell2.theta1);
    }

    #[test]
    fn three_d_ball_builds() {
        let cell = build_cell(&ball_spec(3, 16, &[0.5, 0.5, 0.5], 0.3)).unwrap();
        let exact = 1.0 - 4.0 / 3.0 * std::f64::consts::PI * 0.027;
        assert!((cell.theta1 - exact).abs() < 0.03);
        assert!(!cell.interface.is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn wall_fractions_sum_to_one(
            cx in 0.0f64..1.0, cy in 0.0f64..1.0, r in 0.1f64..0.4,
        ) {
            let cell = build_cell(&ball_spec(2, 32, &[cx, cy], r)).unwrap();
            let fr = cell.wall_fractions().unwrap();
            let total: f64 = fr.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(fr.iter().all(|f| *f >= 0.0));
        }

        #[test]
        fn bitmap_roundtrip_random_balls(
            cx in 0.0f64..1.0, cy in 0.0f64..1.0, r in 0.1f64..0.4,
        ) {
            let cell = build_cell(&ball_spec(2, 24, &[cx, cy], r)).unwrap();
            let spec2 = spec_from_bitmap(&cell.bitmap_text(), None).unwrap();
            let cell2 = build_cell(&spec2).unwrap();
            prop_assert_eq!(cell.pore, cell2.pore);
        }
    }
}
