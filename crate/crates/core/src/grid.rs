//! Sampling grid, medium fields, phantoms and angle sets.
//!
//! The sampling domain is the square `[-S, S]^2`, split into `(2M)^2` square
//! cells of width `h = S / M`. Cell `(m1, m2)` with `-M <= m1, m2 <= M - 1`
//! is centered at `((2 m1 + 1) S / 2M, (2 m2 + 1) S / 2M)`.
//!
//! Fields are stored row-major over `(m1, m2)` with `m1` fastest:
//! `index = (m2 + M) * 2M + (m1 + M)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::{CVector, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    half_width: f64,
    half_divisions: usize,
}

impl Grid {
    pub fn new(half_width: f64, half_divisions: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "half width S must be positive, got {half_width}"
            )));
        }
        if half_divisions == 0 {
            return Err(Error::InvalidGrid(
                "half divisions M must be at least 1".into(),
            ));
        }
        Ok(Grid {
            half_width,
            half_divisions,
        })
    }

    /// `S`.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// `M`.
    pub fn half_divisions(&self) -> usize {
        self.half_divisions
    }

    /// Cells along one side, `2M`.
    pub fn side(&self) -> usize {
        2 * self.half_divisions
    }

    /// Total number of cells `D = (2M)^2`.
    pub fn num_cells(&self) -> usize {
        self.side() * self.side()
    }

    /// Cell width `h = S / M`.
    pub fn cell_width(&self) -> f64 {
        self.half_width / self.half_divisions as f64
    }

    /// Cell area `h^2`, the weight of the discrete `L^2` inner product.
    pub fn cell_area(&self) -> f64 {
        let h = self.cell_width();
        h * h
    }

    /// Flat index of cell `(m1, m2)`, or `None` when out of range.
    pub fn index(&self, m1: i64, m2: i64) -> Option<usize> {
        let m = self.half_divisions as i64;
        if (-m..m).contains(&m1) && (-m..m).contains(&m2) {
            Some(((m2 + m) * 2 * m + (m1 + m)) as usize)
        } else {
            None
        }
    }

    /// `(m1, m2)` of a flat index.
    pub fn cell(&self, index: usize) -> (i64, i64) {
        let side = self.side();
        let m = self.half_divisions as i64;
        ((index % side) as i64 - m, (index / side) as i64 - m)
    }

    /// Center of the cell at a flat index.
    pub fn center(&self, index: usize) -> [f64; 2] {
        let (m1, m2) = self.cell(index);
        let scale = self.half_width / (2.0 * self.half_divisions as f64);
        [
            (2 * m1 + 1) as f64 * scale,
            (2 * m2 + 1) as f64 * scale,
        ]
    }

    /// All cell centers in storage order.
    pub fn centers(&self) -> Vec<[f64; 2]> {
        (0..self.num_cells()).map(|c| self.center(c)).collect()
    }
}

/// Piecewise-constant contrast `q` on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct MediumField {
    grid: Grid,
    values: CVector,
}

impl MediumField {
    pub fn zeros(grid: Grid) -> Self {
        MediumField {
            grid,
            values: CVector::zeros(grid.num_cells()),
        }
    }

    pub fn new(grid: Grid, values: CVector) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::Dimension {
                what: "medium field",
                expected: grid.num_cells(),
                found: values.len(),
            });
        }
        if !values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite {
                what: "medium field",
            });
        }
        Ok(MediumField { grid, values })
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut([f64; 2]) -> C64) -> Self {
        let values = CVector::from_iterator(grid.num_cells(), grid.centers().into_iter().map(&mut f));
        MediumField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &CVector {
        &self.values
    }

    pub fn into_values(self) -> CVector {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn same_grid(&self, other: &MediumField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// The ground-truth characteristic functions used in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhantomKind {
    /// Open unit disk.
    Disk,
    /// Nine disks of radius 0.5 centered at `(a, b)`, `a, b in {-1.5, 0, 1.5}`.
    NineDisks,
}

impl PhantomKind {
    pub fn contains(&self, [x, y]: [f64; 2]) -> bool {
        match self {
            PhantomKind::Disk => x * x + y * y < 1.0,
            PhantomKind::NineDisks => {
                const OFFSETS: [f64; 3] = [-1.5, 0.0, 1.5];
                OFFSETS.iter().any(|&a| {
                    OFFSETS.iter().any(|&b| {
                        let (dx, dy) = (x - a, y - b);
                        dx * dx + dy * dy < 0.25
                    })
                })
            }
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhantomKind::Disk => "disk",
            PhantomKind::NineDisks => "nine_disks",
        })
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disk" => Ok(PhantomKind::Disk),
            "nine_disks" => Ok(PhantomKind::NineDisks),
            other => Err(Error::config(
                "phantom",
                format!("unknown phantom `{other}` (expected disk or nine_disks)"),
            )),
        }
    }
}

/// Characteristic function of the phantom, sampled at cell centers.
pub fn phantom(grid: Grid, kind: PhantomKind) -> MediumField {
    MediumField::from_fn(grid, |c| {
        if kind.contains(c) {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Equispaced unit vectors `(cos(2 pi n / N), sin(2 pi n / N))`, `n = 1..=N`.
///
/// Used both for incident directions and for observation directions.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSet {
    directions: Vec<[f64; 2]>,
}

pub type DirectionSet = AngleSet;
pub type ObservationSet = AngleSet;

impl AngleSet {
    pub fn equispaced(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Domain {
                what: "angle count",
                value: 0.0,
            });
        }
        let directions = (1..=count)
            .map(|n| {
                let t = 2.0 * PI * n as f64 / count as f64;
                [t.cos(), t.sin()]
            })
            .collect();
        Ok(AngleSet { directions })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Zero-based: `get(0)` is `n = 1`.
    pub fn get(&self, i: usize) -> [f64; 2] {
        self.directions[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.directions.iter().copied()
    }

    /// Quadrature weight `2 pi / N` of the trapezoidal rule on the circle.
    pub fn quadrature_weight(&self) -> f64 {
        2.0 * PI / self.len() as f64
    }
}

/// Far-field samples for one incident direction.
#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldData(CVector);

impl FarFieldData {
    pub fn new(values: CVector) -> Result<Self> {
        if !values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite {
                what: "far-field data",
            });
        }
        Ok(FarFieldData(values))
    }

    pub(crate) fn from_raw(values: CVector) -> Self {
        FarFieldData(values)
    }

    pub fn values(&self) -> &CVector {
        &self.0
    }

    pub fn into_values(self) -> CVector {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Squared error `sum_c |a_c - b_c|^2` (no cell-area weight).
pub fn mse(a: &MediumField, b: &MediumField) -> Result<f64> {
    a.same_grid(b)?;
    Ok(a.values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum())
}

/// Discrete `L^2(Q)` inner product `h^2 sum_c conj(a_c) b_c`.
pub fn inner_product_x(a: &MediumField, b: &MediumField) -> Result<C64> {
    a.same_grid(b)?;
    Ok(a.values.dotc(&b.values) * a.grid.cell_area())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_grid_dimensions() {
        let g = Grid::new(3.0, 6).unwrap();
        assert_eq!(g.num_cells(), 144);
        assert_eq!(g.cell_width(), 0.5);
        let c = g.center(g.index(0, 0).unwrap());
        assert_eq!(c, [0.25, 0.25]);
    }

    #[test]
    fn unit_grid_centers() {
        let g = Grid::new(1.0, 1).unwrap();
        let centers = g.centers();
        assert_eq!(centers, vec![[-0.5, -0.5], [0.5, -0.5], [-0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn invalid_grids() {
        assert!(matches!(Grid::new(3.0, 0), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::new(0.0, 2), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::new(-1.0, 2), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::new(f64::NAN, 2), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn index_round_trip_and_centers_inside() {
        let g = Grid::new(2.5, 4).unwrap();
        for c in 0..g.num_cells() {
            let (m1, m2) = g.cell(c);
            assert_eq!(g.index(m1, m2), Some(c));
            let [x, y] = g.center(c);
            assert!(x.abs() < 2.5 && y.abs() < 2.5);
        }
        assert_eq!(g.index(4, 0), None);
        assert_eq!(g.index(0, -5), None);
    }

    #[test]
    fn disk_phantom_cells() {
        let g = Grid::new(3.0, 6).unwrap();
        let q = phantom(g, PhantomKind::Disk);
        assert_eq!(q.values()[g.index(0, 0).unwrap()], C64::new(1.0, 0.0));
        assert_eq!(q.values()[g.index(5, 5).unwrap()], C64::new(0.0, 0.0));
        assert!(q.values().iter().all(|v| v.im == 0.0 && (v.re == 0.0 || v.re == 1.0)));
        // centers (+-0.25, +-0.25), (+-0.75, +-0.25), (+-0.25, +-0.75)
        assert_eq!(q.values().iter().filter(|v| v.re == 1.0).count(), 12);
    }

    #[test]
    fn nine_disk_phantom_cells() {
        let g = Grid::new(3.0, 6).unwrap();
        let q = phantom(g, PhantomKind::NineDisks);
        // (-1.25, -1.25) is sqrt(0.125) from (-1.5, -1.5)
        let c = g.index(-3, -3).unwrap();
        assert_eq!(g.center(c), [-1.25, -1.25]);
        assert_eq!(q.values()[c].re, 1.0);
        assert!(q.values().iter().all(|v| v.re == 0.0 || v.re == 1.0));
    }

    #[test]
    fn phantom_kind_parsing() {
        assert_eq!("disk".parse::<PhantomKind>().unwrap(), PhantomKind::Disk);
        assert_eq!("nine_disks".parse::<PhantomKind>().unwrap(), PhantomKind::NineDisks);
        assert!("square".parse::<PhantomKind>().is_err());
        assert_eq!(PhantomKind::NineDisks.to_string(), "nine_disks");
    }

    #[test]
    fn mse_examples() {
        let g = Grid::new(1.0, 1).unwrap();
        let a = phantom(g, PhantomKind::Disk);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let mut v = a.values().clone();
        v[2] += C64::new(1.0, 0.0);
        let b = MediumField::new(g, v).unwrap();
        assert_eq!(mse(&a, &b).unwrap(), 1.0);
        let other = MediumField::zeros(Grid::new(2.0, 1).unwrap());
        assert!(matches!(mse(&a, &other), Err(Error::GridMismatch)));
    }

    #[test]
    fn inner_product_of_constant_one() {
        let g = Grid::new(1.0, 1).unwrap();
        let one = MediumField::from_fn(g, |_| C64::new(1.0, 0.0));
        assert_eq!(inner_product_x(&one, &one).unwrap(), C64::new(4.0, 0.0));
    }

    #[test]
    fn medium_field_validation() {
        let g = Grid::new(1.0, 1).unwrap();
        assert!(matches!(
            MediumField::new(g, CVector::zeros(3)),
            Err(Error::Dimension { .. })
        ));
        let mut v = CVector::zeros(4);
        v[1] = C64::new(f64::NAN, 0.0);
        assert!(matches!(MediumField::new(g, v), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn angle_sets() {
        let s = AngleSet::equispaced(4).unwrap();
        let last = s.get(3);
        assert!((last[0] - 1.0).abs() < 1e-15 && last[1].abs() < 1e-15);
        let first = s.get(0);
        assert!(first[0].abs() < 1e-15 && (first[1] - 1.0).abs() < 1e-15);
        for d in s.iter() {
            assert!((d[0].hypot(d[1]) - 1.0).abs() < 1e-15);
        }
        assert!(AngleSet::equispaced(0).is_err());
    }

    fn field_strategy(len: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64), len)
    }

    fn to_field(g: Grid, v: &[(f64, f64)]) -> MediumField {
        MediumField::new(g, CVector::from_iterator(v.len(), v.iter().map(|&(r, i)| C64::new(r, i)))).unwrap()
    }

    proptest! {
        #[test]
        fn mse_matches_direct_sum(a in field_strategy(4), b in field_strategy(4)) {
            let g = Grid::new(1.0, 1).unwrap();
            let (fa, fb) = (to_field(g, &a), to_field(g, &b));
            let mut brute = 0.0;
            for i in 0..4 {
                let dr = a[i].0 - b[i].0;
                let di = a[i].1 - b[i].1;
                brute += dr * dr + di * di;
            }
            let m = mse(&fa, &fb).unwrap();
            prop_assert!((m - brute).abs() <= 1e-12 * brute.max(1.0));
            prop_assert_eq!(m, mse(&fb, &fa).unwrap());
            prop_assert!(m >= 0.0);
        }

        #[test]
        fn inner_product_properties(a in field_strategy(16), b in field_strategy(16)) {
            let g = Grid::new(3.0, 2).unwrap();
            let (fa, fb) = (to_field(g, &a), to_field(g, &b));
            let ab = inner_product_x(&fa, &fb).unwrap();
            let ba = inner_product_x(&fb, &fa).unwrap();
            prop_assert!((ab - ba.conj()).norm() <= 1e-12 * ab.norm().max(1.0));
            let aa = inner_product_x(&fa, &fa).unwrap();
            prop_assert!(aa.im.abs() <= 1e-12 * aa.re.abs().max(1.0));
            prop_assert!(aa.re >= 0.0);
            // direct-sum oracle
            let mut re = 0.0;
            let mut im = 0.0;
            let mut scale = 0.0;
            for i in 0..16 {
                let (ar, ai) = a[i];
                let (br, bi) = b[i];
                re += ar * br + ai * bi;
                im += ar * bi - ai * br;
                scale += ar.hypot(ai) * br.hypot(bi);
            }
            let h2 = g.cell_area();
            let oracle = C64::new(h2 * re, h2 * im);
            prop_assert!((ab - oracle).norm() <= 1e-14 * h2 * scale.max(1.0));
        }

        #[test]
        fn phantom_is_order_independent(m in 1usize..8, s in 0.5f64..4.0) {
            let g = Grid::new(s, m).unwrap();
            let q = phantom(g, PhantomKind::NineDisks);
            for c in (0..g.num_cells()).rev() {
                let expected = if PhantomKind::NineDisks.contains(g.center(c)) { 1.0 } else { 0.0 };
                prop_assert_eq!(q.values()[c].re, expected);
            }
        }
    }
}
