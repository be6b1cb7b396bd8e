//! Sphere-valued fields on a [`DomainGrid`] and their on-disk format.
//!
//! # Field files
//!
//! Binary (`.field`), all integers and floats little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 0..8  | magic `BLFIELD1` |
//! | 8..32 | `nx`, `ny`, `m` as `u64` |
//! | 32..48| `Lx`, `Ly` as `f64` |
//! | 48..  | `nx * ny * m` node values as `f64`, row-major (x fastest), components contiguous |
//!
//! Text (`.txt`): a first line `bubblelab-field v1`, a header line
//! `nx ny Lx Ly m`, then one line per node holding its `m` components. Floats
//! are written with 17 significant digits so both formats round-trip exactly.
//!
//! A header with `ny = 1` and `Ly = 1` denotes a circle domain.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::DomainGrid;
use crate::scalar::Scalar;
use crate::target::{project_nodes, EmbeddedTarget, TargetManifold};

const MAGIC: &[u8; 8] = b"BLFIELD1";
const TEXT_TAG: &str = "bubblelab-field v1";

#[derive(Clone, Debug, PartialEq)]
pub struct MapField<T> {
    grid: DomainGrid<T>,
    target: TargetManifold,
    values: Vec<T>,
}

impl<T: Scalar> MapField<T> {
    /// Wraps node values, checking shape and that every node lies on the target.
    pub fn new(grid: DomainGrid<T>, target: TargetManifold, values: Vec<T>) -> Result<Self> {
        let expected = grid.len() * target.m();
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: values.len(),
            });
        }
        let field = MapField { grid, target, values };
        field.check_on_target()?;
        Ok(field)
    }

    /// Builds a field by projecting `f(position)` onto the target at every node.
    pub fn from_fn(
        grid: DomainGrid<T>,
        target: TargetManifold,
        mut f: impl FnMut(crate::grid::Point<T>) -> Vec<T>,
    ) -> Result<Self> {
        let m = target.m();
        let mut values = Vec::with_capacity(grid.len() * m);
        for k in 0..grid.len() {
            let v = f(grid.position(k));
            if v.len() != m {
                return Err(Error::ShapeMismatch {
                    expected: m,
                    got: v.len(),
                });
            }
            values.extend(v);
        }
        project_nodes(&target, &mut values)?;
        Ok(MapField { grid, target, values })
    }

    pub fn constant(grid: DomainGrid<T>, target: TargetManifold, point: &[T]) -> Result<Self> {
        let p = point.to_vec();
        Self::from_fn(grid, target, |_| p.clone())
    }

    /// Projects raw ambient values onto the target.
    pub(crate) fn from_ambient(grid: DomainGrid<T>, target: TargetManifold, mut values: Vec<T>) -> Result<Self> {
        project_nodes(&target, &mut values)?;
        Ok(MapField { grid, target, values })
    }

    pub fn check_on_target(&self) -> Result<()> {
        let tol = T::on_target_tolerance();
        for (k, node) in self.values.chunks(self.m()).enumerate() {
            let dev = self.target.deviation(node);
            if !(dev <= tol) {
                return Err(Error::OffTarget {
                    node: k,
                    deviation: dev.as_f64(),
                });
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &DomainGrid<T> {
        &self.grid
    }

    pub fn target(&self) -> &TargetManifold {
        &self.target
    }

    /// Embedding dimension.
    pub fn m(&self) -> usize {
        self.target.m()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn node(&self, k: usize) -> &[T] {
        let m = self.m();
        &self.values[k * m..(k + 1) * m]
    }

    pub fn jacobian(&self) -> Vec<T> {
        self.grid.jacobian(&self.values, self.m())
    }

    pub fn laplacian(&self) -> Vec<T> {
        self.grid.laplacian(&self.values, self.m())
    }

    pub fn bilaplacian(&self) -> Vec<T> {
        self.grid.bilaplacian(&self.values, self.m())
    }

    /// Nodal Dirichlet energy density (see [`DomainGrid::energy_density`]).
    pub fn energy_density(&self) -> Vec<T> {
        self.grid.energy_density(&self.values, self.m())
    }

    /// Pointwise `|∇u|^2` from the central-difference Jacobian.
    pub fn jacobian_norm_sq(&self) -> Vec<T> {
        let jac = self.jacobian();
        jac.chunks(2 * self.m())
            .map(|j| {
                let mut s = T::zero();
                for v in j {
                    s += *v * *v;
                }
                s
            })
            .collect()
    }

    /// Shifts the field by whole nodes: `out(i, j) = u(i - di, j - dj)`.
    pub fn translate(&self, di: usize, dj: usize) -> Self {
        let (nx, ny, m) = (self.grid.nx(), self.grid.ny(), self.m());
        let mut values = vec![T::zero(); self.values.len()];
        for j in 0..ny {
            for i in 0..nx {
                let src = self.grid.index(i, j);
                let dst = self.grid.index((i + di) % nx, (j + dj) % ny);
                values[dst * m..(dst + 1) * m].copy_from_slice(&self.values[src * m..(src + 1) * m]);
            }
        }
        MapField {
            grid: self.grid.clone(),
            target: self.target,
            values,
        }
    }

    /// Converts to another precision.
    pub fn cast<U: Scalar>(&self) -> Result<MapField<U>> {
        let grid = if self.grid.is_circle() {
            DomainGrid::circle(self.grid.nx(), U::lit(self.grid.lx().as_f64()))?
        } else {
            DomainGrid::torus(
                self.grid.nx(),
                self.grid.ny(),
                U::lit(self.grid.lx().as_f64()),
                U::lit(self.grid.ly().as_f64()),
            )?
        };
        let values = self.values.iter().map(|v| U::lit(v.as_f64())).collect();
        MapField::<U>::from_ambient(grid, self.target, values)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        for n in [self.grid.nx(), self.grid.ny(), self.m()] {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for x in [self.grid.lx(), self.grid.ly()] {
            w.write_all(&x.as_f64().to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.as_f64().to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic in binary field file".into()));
        }
        let mut b8 = [0u8; 8];
        let mut dims = [0usize; 3];
        for d in dims.iter_mut() {
            r.read_exact(&mut b8)?;
            *d = usize::try_from(u64::from_le_bytes(b8)).map_err(|_| Error::Format("dimension overflow".into()))?;
        }
        let mut lens = [0f64; 2];
        for l in lens.iter_mut() {
            r.read_exact(&mut b8)?;
            *l = f64::from_le_bytes(b8);
        }
        let [nx, ny, m] = dims;
        let (grid, target) = Self::header(nx, ny, lens[0], lens[1], m)?;
        let count = nx
            .checked_mul(ny)
            .and_then(|n| n.checked_mul(m))
            .ok_or_else(|| Error::Format("field size overflow".into()))?;
        let mut raw = vec![0u8; count * 8];
        r.read_exact(&mut raw)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
            .collect();
        MapField::new(grid, target, values)
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TEXT_TAG}")?;
        writeln!(
            w,
            "{} {} {:.16e} {:.16e} {}",
            self.grid.nx(),
            self.grid.ny(),
            self.grid.lx().as_f64(),
            self.grid.ly().as_f64(),
            self.m()
        )?;
        for node in self.values.chunks(self.m()) {
            let line: Vec<String> = node.iter().map(|v| format!("{:.16e}", v.as_f64())).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read_text<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Format(format!("missing {what}")))?
                .map_err(Error::from)
        };
        if next("tag")?.trim() != TEXT_TAG {
            return Err(Error::Format("bad tag in text field file".into()));
        }
        let header = next("header")?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 5 {
            return Err(Error::Format("header must be `nx ny Lx Ly m`".into()));
        }
        let bad = |_| Error::Format("unparseable header".into());
        let nx: usize = parts[0].parse().map_err(|_| Error::Format("bad nx".into()))?;
        let ny: usize = parts[1].parse().map_err(|_| Error::Format("bad ny".into()))?;
        let lx: f64 = parts[2].parse().map_err(bad)?;
        let ly: f64 = parts[3].parse().map_err(bad)?;
        let m: usize = parts[4].parse().map_err(|_| Error::Format("bad m".into()))?;
        let (grid, target) = Self::header(nx, ny, lx, ly, m)?;
        let mut values = Vec::with_capacity(nx * ny * m);
        for k in 0..nx * ny {
            let line = next("node line")?;
            let before = values.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::Format(format!("bad value on node {k}")))?;
                values.push(T::lit(v));
            }
            if values.len() - before != m {
                return Err(Error::Format(format!("node {k} has wrong component count")));
            }
        }
        MapField::new(grid, target, values)
    }

    fn header(nx: usize, ny: usize, lx: f64, ly: f64, m: usize) -> Result<(DomainGrid<T>, TargetManifold)> {
        if m < 2 {
            return Err(Error::Format(format!("embedding dimension {m} < 2")));
        }
        let grid = if ny == 1 {
            DomainGrid::circle(nx, T::lit(lx))?
        } else {
            DomainGrid::torus(nx, ny, T::lit(lx), T::lit(ly))?
        };
        Ok((grid, TargetManifold::sphere(m - 1)?))
    }

    /// Writes binary for `.field`, text otherwise.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        if path.extension().is_some_and(|e| e == "field") {
            self.write_binary(file)
        } else {
            self.write_text(file)
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        if path.extension().is_some_and(|e| e == "field") {
            Self::read_binary(file)
        } else {
            Self::read_text(file)
        }
    }
}
