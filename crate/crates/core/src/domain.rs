//! Slab discretization and the box-constrained design variable.
//!
//! The slab is `[0, 2π) × (−b, 0)` with x periodic. Nodes are indexed by
//! column `i ∈ 0..nx` (x = i·h_x, wrapping) and row `j ∈ 0..=ny`
//! (y = −j·h_y, so row 0 is the top boundary and row `ny` the bottom one).
//! Cells sit between node rows and carry the permittivity; cell `(i, j)`
//! spans `[x_i, x_{i+1}] × [y_{j+1}, y_j]`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{cplx, Cplx, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T> {
    nx: usize,
    ny: usize,
    b: T,
}

impl<T: Real> Grid<T> {
    pub fn new(nx: usize, ny: usize, b: T) -> Result<Self> {
        if nx < 4 || ny < 2 {
            return Err(Error::Config(format!(
                "grid needs nx >= 4 and ny >= 2, got {nx}x{ny}"
            )));
        }
        if !(b > T::zero()) || !b.is_finite() {
            return Err(Error::Config(format!("slab thickness must be positive, got {b}")));
        }
        Ok(Self { nx, ny, b })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn thickness(&self) -> T {
        self.b
    }

    pub fn hx(&self) -> T {
        T::TAU() / T::of(self.nx)
    }

    pub fn hy(&self) -> T {
        self.b / T::of(self.ny)
    }

    pub fn node_rows(&self) -> usize {
        self.ny + 1
    }

    pub fn num_nodes(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.nx + i % self.nx
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Nodes of cell `(i, j)` in local order `(i,j), (i+1,j), (i,j+1), (i+1,j+1)`.
    #[inline]
    pub fn cell_nodes(&self, i: usize, j: usize) -> [usize; 4] {
        let ip = (i + 1) % self.nx;
        [
            self.node(i, j),
            self.node(ip, j),
            self.node(i, j + 1),
            self.node(ip, j + 1),
        ]
    }

    pub fn node_x(&self, i: usize) -> T {
        T::of(i) * self.hx()
    }

    pub fn node_y(&self, j: usize) -> T {
        -T::of(j) * self.hy()
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (T, T) {
        let half = T::lit(0.5);
        (
            (T::of(i) + half) * self.hx(),
            -(T::of(j) + half) * self.hy(),
        )
    }

    /// Reflection x → −x acting on cell columns.
    #[inline]
    pub fn mirror_cell_column(&self, i: usize) -> usize {
        self.nx - 1 - i
    }

    /// Reflection x → −x acting on node columns.
    #[inline]
    pub fn mirror_node_column(&self, i: usize) -> usize {
        (self.nx - i) % self.nx
    }

    /// Node index of the x-mirror of node `k`.
    pub fn mirror_node(&self, k: usize) -> usize {
        let (i, j) = (k % self.nx, k / self.nx);
        self.node(self.mirror_node_column(i), j)
    }

    /// Cell index of the x-mirror of cell `c`.
    pub fn mirror_cell(&self, c: usize) -> usize {
        let (i, j) = (c % self.nx, c / self.nx);
        self.cell(self.mirror_cell_column(i), j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleBounds<T> {
    pub rho_r0: T,
    pub rho_r1: T,
    pub rho_i0: T,
    pub rho_i1: T,
}

impl<T: Real> AdmissibleBounds<T> {
    pub fn new(rho_r0: T, rho_r1: T, rho_i0: T, rho_i1: T) -> Result<Self> {
        let ok = rho_r0 > T::zero()
            && rho_r0 <= rho_r1
            && rho_i0 >= T::zero()
            && rho_i0 <= rho_i1
            && rho_r1.is_finite()
            && rho_i1.is_finite();
        if !ok {
            return Err(Error::Config(format!(
                "inadmissible bounds: need 0 < rho_r0 <= rho_r1 and 0 <= rho_i0 <= rho_i1, \
                 got [{rho_r0}, {rho_r1}] x [{rho_i0}, {rho_i1}]"
            )));
        }
        Ok(Self {
            rho_r0,
            rho_r1,
            rho_i0,
            rho_i1,
        })
    }

    pub fn clamp(&self, z: Cplx<T>) -> Cplx<T> {
        cplx(
            z.re.max(self.rho_r0).min(self.rho_r1),
            z.im.max(self.rho_i0).min(self.rho_i1),
        )
    }

    pub fn contains(&self, z: Cplx<T>) -> bool {
        z.re >= self.rho_r0 && z.re <= self.rho_r1 && z.im >= self.rho_i0 && z.im <= self.rho_i1
    }
}

/// Per-cell complex relative permittivity on the slab.
///
/// Values may temporarily leave the admissible box (trial steps, finite
/// difference probes); [`DesignField::project_to_admissible`] restores it.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignField<T> {
    pub grid: Grid<T>,
    pub values: Vec<Cplx<T>>,
    pub bounds: AdmissibleBounds<T>,
}

/// Initial guess for the design.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDesign<T> {
    Uniform(Cplx<T>),
    /// Square lattice of circular rods centred on `(m·lattice, −b/2 + k·lattice)`.
    PhotonicCrystal {
        rod_eps: T,
        background_eps: T,
        rod_radius: T,
        lattice: T,
    },
    Random {
        seed: u64,
    },
}

impl<T: Real> DesignField<T> {
    pub fn new(grid: Grid<T>, values: Vec<Cplx<T>>, bounds: AdmissibleBounds<T>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::Dimension(format!(
                "design has {} values for {} cells",
                values.len(),
                grid.num_cells()
            )));
        }
        Ok(Self {
            grid,
            values,
            bounds,
        })
    }

    pub fn uniform(grid: Grid<T>, value: Cplx<T>, bounds: AdmissibleBounds<T>) -> Self {
        Self {
            grid,
            values: vec![value; grid.num_cells()],
            bounds,
        }
    }

    pub fn value(&self, i: usize, j: usize) -> Cplx<T> {
        self.values[self.grid.cell(i, j)]
    }

    pub fn is_admissible(&self) -> bool {
        self.values.iter().all(|&z| self.bounds.contains(z))
    }

    pub fn project_to_admissible(&self) -> Self {
        Self {
            values: self.values.iter().map(|&z| self.bounds.clamp(z)).collect(),
            ..self.clone()
        }
    }

    /// Average each cell with its mirror image about x = 0.
    pub fn symmetrize_x(&self) -> Result<Self> {
        Ok(Self {
            values: symmetrize_cells(&self.grid, &self.values)?,
            ..self.clone()
        })
    }

    pub fn is_x_symmetric(&self, tol: T) -> bool {
        (0..self.values.len())
            .all(|c| (self.values[c] - self.values[self.grid.mirror_cell(c)]).norm() <= tol)
    }

    /// Largest |ρ − ρ_mirror| over cells.
    pub fn asymmetry(&self) -> T {
        (0..self.values.len())
            .map(|c| (self.values[c] - self.values[self.grid.mirror_cell(c)]).norm())
            .fold(T::zero(), T::max)
    }

    /// `self + t·direction`, cell by cell, without projection.
    pub fn perturbed(&self, direction: &[Cplx<T>], t: T) -> Self {
        Self {
            values: self
                .values
                .iter()
                .zip(direction)
                .map(|(&v, &d)| v + d * t)
                .collect(),
            ..self.clone()
        }
    }

    /// Hash of the exact bit patterns, used to tag solver failures.
    pub fn content_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.grid.nx.hash(&mut h);
        self.grid.ny.hash(&mut h);
        for z in &self.values {
            z.re.to_f64().unwrap_or(0.0).to_bits().hash(&mut h);
            z.im.to_f64().unwrap_or(0.0).to_bits().hash(&mut h);
        }
        h.finish()
    }

    pub fn write_text<W: Write>(&self, w: W) -> Result<()> {
        write_cell_field(w, &self.grid, &self.bounds, &self.values)
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let (grid, bounds, values) = read_cell_field(r)?;
        Self::new(grid, values, bounds)
    }
}

pub fn symmetrize_cells<T: Real>(grid: &Grid<T>, values: &[Cplx<T>]) -> Result<Vec<Cplx<T>>> {
    if grid.nx % 2 == 1 {
        return Err(Error::Config(format!(
            "x-symmetrization needs an even nx, got {}",
            grid.nx
        )));
    }
    let half = T::lit(0.5);
    Ok((0..values.len())
        .map(|c| (values[c] + values[grid.mirror_cell(c)]) * half)
        .collect())
}

pub fn initial_design<T: Real>(
    kind: &InitialDesign<T>,
    grid: Grid<T>,
    bounds: AdmissibleBounds<T>,
) -> Result<DesignField<T>> {
    let field = match *kind {
        InitialDesign::Uniform(c) => {
            if !bounds.contains(c) {
                return Err(Error::Config(format!(
                    "uniform initial value {c} outside admissible bounds"
                )));
            }
            DesignField::uniform(grid, c, bounds)
        }
        InitialDesign::PhotonicCrystal {
            rod_eps,
            background_eps,
            rod_radius,
            lattice,
        } => {
            let im = bounds.rho_i0;
            let rod = cplx(rod_eps, im);
            let background = cplx(background_eps, im);
            if !bounds.contains(rod) || !bounds.contains(background) {
                return Err(Error::Config(
                    "photonic crystal permittivities outside admissible bounds".into(),
                ));
            }
            if rod_radius < T::zero() || !(lattice > T::zero()) {
                return Err(Error::Config(
                    "photonic crystal needs rod_radius >= 0 and lattice > 0".into(),
                ));
            }
            let mut values = Vec::with_capacity(grid.num_cells());
            let y0 = -grid.thickness() / T::lit(2.0);
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    let (mut x, y) = grid.cell_center(i, j);
                    if x > T::PI() {
                        x -= T::TAU();
                    }
                    let dx = x - (x / lattice).round() * lattice;
                    let dy = (y - y0) - ((y - y0) / lattice).round() * lattice;
                    let inside = rod_radius > T::zero()
                        && dx * dx + dy * dy <= rod_radius * rod_radius;
                    values.push(if inside { rod } else { background });
                }
            }
            DesignField::new(grid, values, bounds)?.symmetrize_x()?
        }
        InitialDesign::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values = (0..grid.num_cells())
                .map(|_| {
                    let a: f64 = rng.gen();
                    let b: f64 = rng.gen();
                    cplx(
                        bounds.rho_r0 + (bounds.rho_r1 - bounds.rho_r0) * T::lit(a),
                        bounds.rho_i0 + (bounds.rho_i1 - bounds.rho_i0) * T::lit(b),
                    )
                })
                .collect();
            DesignField::new(grid, values, bounds)?.symmetrize_x()?
        }
    };
    Ok(field.project_to_admissible())
}

/// Writes per-cell complex values in the design text format.
pub fn write_cell_field<T: Real, W: Write>(
    mut w: W,
    grid: &Grid<T>,
    bounds: &AdmissibleBounds<T>,
    values: &[Cplx<T>],
) -> Result<()> {
    writeln!(
        w,
        "{} {} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
        grid.nx(),
        grid.ny(),
        grid.thickness(),
        bounds.rho_r0,
        bounds.rho_r1,
        bounds.rho_i0,
        bounds.rho_i1
    )?;
    for z in values {
        writeln!(w, "{:.16e} {:.16e}", z.re, z.im)?;
    }
    Ok(())
}

pub(crate) fn parse_num<T: Real>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        message: format!("missing {what}"),
    })?;
    tok.parse::<T>().map_err(|_| Error::Parse {
        line,
        message: format!("bad {what} `{tok}`"),
    })
}

pub fn read_cell_field<T: Real, R: BufRead>(
    r: R,
) -> Result<(Grid<T>, AdmissibleBounds<T>, Vec<Cplx<T>>)> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty design file".into(),
    })?;
    let header = header?;
    let mut toks = header.split_whitespace();
    let nx: usize = parse_usize(toks.next(), 1, "nx")?;
    let ny: usize = parse_usize(toks.next(), 1, "ny")?;
    let b: T = parse_num(toks.next(), 1, "b")?;
    let r0: T = parse_num(toks.next(), 1, "rho_r0")?;
    let r1: T = parse_num(toks.next(), 1, "rho_r1")?;
    let i0: T = parse_num(toks.next(), 1, "rho_i0")?;
    let i1: T = parse_num(toks.next(), 1, "rho_i1")?;
    let grid = Grid::new(nx, ny, b)?;
    let bounds = AdmissibleBounds::new(r0, r1, i0, i1)?;
    let mut values = Vec::with_capacity(grid.num_cells());
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let re: T = parse_num(toks.next(), idx + 1, "real part")?;
        let im: T = parse_num(toks.next(), idx + 1, "imaginary part")?;
        values.push(cplx(re, im));
    }
    if values.len() != grid.num_cells() {
        return Err(Error::Dimension(format!(
            "design file has {} cells, header promises {}",
            values.len(),
            grid.num_cells()
        )));
    }
    Ok((grid, bounds, values))
}

pub(crate) fn parse_usize(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        message: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad {what} `{tok}`"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn bounds() -> AdmissibleBounds<f64> {
        AdmissibleBounds::new(1.0, 12.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(3, 4, 1.0_f64).is_err());
        assert!(Grid::new(4, 1, 1.0_f64).is_err());
        assert!(Grid::new(4, 2, 0.0_f64).is_err());
        let g = Grid::new(8, 4, 2.0_f64).unwrap();
        assert_eq!(g.num_nodes(), 8 * 5);
        assert_eq!(g.num_cells(), 32);
        assert_eq!(g.cell_nodes(7, 0), [7, 0, 15, 8]);
    }

    #[test]
    fn bounds_allow_zero_loss_floor() {
        assert!(AdmissibleBounds::new(1.0, 12.0, 0.0, 0.0_f64).is_ok());
        assert!(AdmissibleBounds::new(0.0, 12.0, 0.0, 0.0_f64).is_err());
        assert!(AdmissibleBounds::new(2.0, 1.0, 0.0, 0.0_f64).is_err());
        assert!(AdmissibleBounds::new(1.0, 2.0, -0.1, 0.0_f64).is_err());
    }

    #[test]
    fn projection_clamps_parts_independently() {
        let g = Grid::new(4, 2, 1.0).unwrap();
        let mut d = DesignField::uniform(g, cplx(6.0, 0.5), bounds());
        d.values[0] = cplx(15.0, 0.5);
        d.values[1] = cplx(0.2, -0.3);
        let p = d.project_to_admissible();
        assert_eq!(p.values[0], cplx(12.0, 0.5));
        assert_eq!(p.values[1], cplx(1.0, 0.0));
        assert_eq!(p.values[2], cplx(6.0, 0.5));
        assert_eq!(p.project_to_admissible(), p);
    }

    #[test]
    fn symmetrize_one_hot() {
        let g = Grid::new(8, 2, 1.0).unwrap();
        let mut d = DesignField::uniform(g, cplx(0.0, 0.0), bounds());
        let c = g.cell(2, 1);
        d.values[c] = cplx(2.0, 0.0);
        let s = d.symmetrize_x().unwrap();
        let m = g.cell(g.mirror_cell_column(2), 1);
        assert_ne!(c, m);
        assert_eq!(s.values[c], cplx(1.0, 0.0));
        assert_eq!(s.values[m], cplx(1.0, 0.0));
        assert_eq!(s.values.iter().filter(|z| z.norm() > 0.0).count(), 2);
        assert_eq!(s.symmetrize_x().unwrap(), s);
    }

    #[test]
    fn projection_and_symmetrization_do_not_commute_in_general() {
        // a mirror pair straddling the upper bound
        let g = Grid::new(4, 2, 1.0).unwrap();
        let mut d = DesignField::uniform(g, cplx(6.0, 0.0), bounds());
        d.values[g.cell(0, 0)] = cplx(15.0, 0.0);
        d.values[g.cell(3, 0)] = cplx(1.0, 0.0);
        let a = d.project_to_admissible().symmetrize_x().unwrap();
        let b = d.symmetrize_x().unwrap().project_to_admissible();
        assert_eq!(a.values[0], cplx(6.5, 0.0));
        assert_eq!(b.values[0], cplx(8.0, 0.0));
    }

    #[test]
    fn symmetrize_rejects_odd_nx() {
        let g = Grid::new(5, 2, 1.0).unwrap();
        let d = DesignField::uniform(g, cplx(2.0, 0.0), bounds());
        assert!(matches!(d.symmetrize_x(), Err(Error::Config(_))));
    }

    #[test]
    fn initial_designs() {
        let g = Grid::new(4, 4, 1.0).unwrap();
        let u = initial_design(&InitialDesign::Uniform(cplx(6.0, 0.0)), g, bounds()).unwrap();
        assert!(u.values.iter().all(|&z| z == cplx(6.0, 0.0)));
        assert!(initial_design(&InitialDesign::Uniform(cplx(13.0, 0.0)), g, bounds()).is_err());

        let g = Grid::new(32, 16, 3.0).unwrap();
        let pc = InitialDesign::PhotonicCrystal {
            rod_eps: 9.0,
            background_eps: 1.0,
            rod_radius: 0.0,
            lattice: 1.0,
        };
        let d = initial_design(&pc, g, bounds()).unwrap();
        assert!(d.values.iter().all(|&z| z == cplx(1.0, 0.0)));

        let pc = InitialDesign::PhotonicCrystal {
            rod_eps: 9.0,
            background_eps: 1.0,
            rod_radius: 0.35,
            lattice: 1.0,
        };
        let d = initial_design(&pc, g, bounds()).unwrap();
        assert!(d.values.iter().any(|&z| z == cplx(9.0, 0.0)));
        assert!(d.is_admissible() && d.is_x_symmetric(0.0));

        let r1 = initial_design(&InitialDesign::Random { seed: 42 }, g, bounds()).unwrap();
        let r2 = initial_design(&InitialDesign::Random { seed: 42 }, g, bounds()).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.is_admissible() && r1.is_x_symmetric(0.0));
        let r3 = initial_design(&InitialDesign::Random { seed: 43 }, g, bounds()).unwrap();
        assert_ne!(r1, r3);
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let g = Grid::new(8, 4, std::f64::consts::PI).unwrap();
        let d = initial_design(&InitialDesign::Random { seed: 7 }, g, bounds()).unwrap();
        let mut buf = Vec::new();
        d.write_text(&mut buf).unwrap();
        let back = DesignField::<f64>::read_text(&buf[..]).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn read_rejects_truncated_file() {
        let text = "4 2 1.0 1 12 0 1\n1 0\n";
        assert!(matches!(
            DesignField::<f64>::read_text(text.as_bytes()),
            Err(Error::Dimension(_))
        ));
        let text = "4 2 1.0 1 12 0\n";
        assert!(matches!(
            DesignField::<f64>::read_text(text.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn incidence_is_consistent_with_periodic_wrap() {
        for nx in [4usize, 6, 8] {
            for ny in [2usize, 3] {
                let g = Grid::new(nx, ny, 1.0_f64).unwrap();
                let mut seen = std::collections::HashSet::new();
                let mut touches = vec![0usize; g.num_nodes()];
                for j in 0..ny {
                    for i in 0..nx {
                        let nodes = g.cell_nodes(i, j);
                        let distinct: std::collections::HashSet<_> = nodes.iter().collect();
                        assert_eq!(distinct.len(), 4);
                        for (local, &k) in nodes.iter().enumerate() {
                            assert!(seen.insert((g.cell(i, j), local)));
                            touches[k] += 1;
                            let (ni, nj) = (k % nx, k / nx);
                            assert_eq!(ni, (i + local % 2) % nx);
                            assert_eq!(nj, j + local / 2);
                        }
                    }
                }
                // interior rows touch 4 cells, boundary rows 2
                for (k, &t) in touches.iter().enumerate() {
                    let row = k / nx;
                    let expect = if row == 0 || row == ny { 2 } else { 4 };
                    assert_eq!(t, expect);
                }
                for c in 0..g.num_cells() {
                    assert_eq!(g.mirror_cell(g.mirror_cell(c)), c);
                }
                for k in 0..g.num_nodes() {
                    assert_eq!(g.mirror_node(g.mirror_node(k)), k);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn both_orders_are_admissible_and_symmetric(
            seed in 0u64..1000,
            spread in 0.5f64..20.0,
        ) {
            let g = Grid::new(8, 3, 1.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values = (0..g.num_cells())
                .map(|_| cplx(rng.gen_range(-spread..spread) + 6.0, rng.gen_range(-spread..spread)))
                .collect();
            let d = DesignField::new(g, values, bounds()).unwrap();
            for e in [
                d.project_to_admissible().symmetrize_x().unwrap(),
                d.symmetrize_x().unwrap().project_to_admissible(),
            ] {
                prop_assert!(e.is_admissible());
                prop_assert!(e.is_x_symmetric(0.0));
                prop_assert_eq!(&e.project_to_admissible(), &e);
                prop_assert_eq!(&e.symmetrize_x().unwrap(), &e);
            }
        }

        #[test]
        fn projection_commutes_on_admissible_fields(seed in 0u64..1000) {
            let g = Grid::new(8, 3, 1.0).unwrap();
            let d = initial_design(&InitialDesign::Random { seed }, g, bounds()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            let values: Vec<_> = d.values.iter().map(|&z| {
                let t: f64 = rng.gen();
                z * t + cplx(1.0, 0.0) * (1.0 - t)
            }).collect();
            let d = DesignField::new(g, values, bounds()).unwrap();
            let a = d.project_to_admissible().symmetrize_x().unwrap();
            let b = d.symmetrize_x().unwrap().project_to_admissible();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn projection_commutes_on_symmetric_fields(seed in 0u64..1000) {
            let g = Grid::new(8, 3, 1.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<_> = (0..g.num_cells())
                .map(|_| cplx(rng.gen_range(-5.0..20.0), rng.gen_range(-1.0..2.0)))
                .collect();
            let d = DesignField::new(g, values, bounds()).unwrap().symmetrize_x().unwrap();
            let a = d.project_to_admissible().symmetrize_x().unwrap();
            let b = d.symmetrize_x().unwrap().project_to_admissible();
            prop_assert_eq!(a, b);
        }
    }
}
