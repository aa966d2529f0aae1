//! Newton-basin scans over rectangular grids of initial guesses.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problems::Problem;
use crate::solvers::run_untraced;
use crate::types::{fmt_float, SolverConfig, Status};

/// Distance within which a converged point is attributed to a known root.
pub const CLASSIFY_RADIUS: f64 = 1e-3;

/// Label of cells that did not converge.
pub const UNCONVERGED: i32 = 0;
/// Label of cells that converged somewhere not in the registry.
pub const UNREGISTERED: i32 = -1;

/// Gray level used for [`UNREGISTERED`] cells in PGM output.
const UNREGISTERED_GRAY: u8 = 32;

/// Rectangular scan domain `[xmin, xmax] × [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Domain {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        let ok = |a: f64, b: f64| a.is_finite() && b.is_finite() && a < b;
        if !ok(xmin, xmax) || !ok(ymin, ymax) {
            return Err(Error::InvalidConfig(format!(
                "empty domain [{xmin}, {xmax}] x [{ymin}, {ymax}]"
            )));
        }
        Ok(Self {
            x: (xmin, xmax),
            y: (ymin, ymax),
        })
    }

    /// The problem's default scan domain (2-D problems only).
    pub fn of(problem: &Problem) -> Result<Self> {
        match problem.domain() {
            [x, y] => Self::new(x.0, x.1, y.0, y.1),
            d => Err(Error::ShapeMismatch {
                expected: 2,
                found: d.len(),
            }),
        }
    }
}

/// Center of cell `i` out of `n` uniform cells on `[lo, hi]`.
pub fn cell_center(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    lo + (hi - lo) * (2 * i + 1) as f64 / (2 * n) as f64
}

/// Per-cell labels and iteration counts. Cell `(i, j)` has x index `i` and
/// y index `j`, stored at `i * ny + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasinGrid {
    pub domain: Domain,
    pub nx: usize,
    pub ny: usize,
    /// Number of registered roots (labels range over `-1..=num_roots`).
    pub num_roots: usize,
    pub labels: Vec<i32>,
    pub iters: Vec<usize>,
}

impl BasinGrid {
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    pub fn label(&self, i: usize, j: usize) -> i32 {
        self.labels[self.index(i, j)]
    }

    pub fn start(&self, i: usize, j: usize) -> [f64; 2] {
        [
            cell_center(self.domain.x.0, self.domain.x.1, self.nx, i),
            cell_center(self.domain.y.0, self.domain.y.1, self.ny, j),
        ]
    }

    /// Binary PGM (P5, maxval 255). Unconverged cells are black, root `k` of
    /// `K` is gray `round(255 k / K)`, unregistered limits are gray 32. The
    /// top image row is the largest y.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.nx, self.ny)?;
        let k = self.num_roots.max(1) as f64;
        let mut row = vec![0u8; self.nx];
        for r in 0..self.ny {
            let j = self.ny - 1 - r;
            for (i, px) in row.iter_mut().enumerate() {
                *px = match self.label(i, j) {
                    UNCONVERGED => 0,
                    UNREGISTERED => UNREGISTERED_GRAY,
                    l => (255.0 * l as f64 / k).round() as u8,
                };
            }
            out.write_all(&row)?;
        }
        Ok(())
    }

    /// CSV `i,j,x0,y0,label,iters`, `i` outermost.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(b"i,j,x0,y0,label,iters\n")?;
        for i in 0..self.nx {
            for j in 0..self.ny {
                let [x0, y0] = self.start(i, j);
                let idx = self.index(i, j);
                writeln!(
                    out,
                    "{i},{j},{},{},{},{}",
                    fmt_float(x0),
                    fmt_float(y0),
                    self.labels[idx],
                    self.iters[idx]
                )?;
            }
        }
        Ok(())
    }
}

/// Label for one finished run: 0 unless converged, else the 1-based index of
/// the nearest root within [`CLASSIFY_RADIUS`], else -1.
pub fn classify(x_final: &[f64], roots: &[Vec<f64>], status: Status) -> i32 {
    if status != Status::Converged {
        return UNCONVERGED;
    }
    let dist = |r: &Vec<f64>| {
        r.iter()
            .zip(x_final)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    roots
        .iter()
        .enumerate()
        .map(|(k, r)| (k, dist(r)))
        .filter(|(_, d)| *d < CLASSIFY_RADIUS)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(UNREGISTERED, |(k, _)| k as i32 + 1)
}

/// Runs the solver from one start and classifies the outcome.
pub fn classify_start(
    problem: &Problem,
    config: &SolverConfig,
    x0: &[f64],
) -> Result<(i32, usize)> {
    let r = run_untraced(problem, config, x0)?;
    Ok((
        classify(&r.final_state.x, problem.known_roots(), r.status),
        r.iterations,
    ))
}

/// Scans an `nx × ny` grid of cell-centered starts.
///
/// Uses `config.max_iter()` as the per-cell budget (configure it to
/// [`SolverConfig::BASIN_MAX_ITER`] for the conventional scans). Cells run in
/// parallel; the result does not depend on scheduling.
pub fn compute_basin(
    problem: &Problem,
    config: &SolverConfig,
    domain: Domain,
    nx: usize,
    ny: usize,
) -> Result<BasinGrid> {
    if problem.dim() != 2 {
        return Err(Error::ShapeMismatch {
            expected: 2,
            found: problem.dim(),
        });
    }
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidConfig(format!(
            "grid must be at least 2x2, got {nx}x{ny}"
        )));
    }
    let mut grid = BasinGrid {
        domain,
        nx,
        ny,
        num_roots: problem.known_roots().len(),
        labels: Vec::new(),
        iters: Vec::new(),
    };
    let cells: Vec<(i32, usize)> = (0..nx * ny)
        .into_par_iter()
        .map(|idx| classify_start(problem, config, &grid.start(idx / ny, idx % ny)))
        .collect::<Result<_>>()?;
    (grid.labels, grid.iters) = cells.into_iter().unzip();
    Ok(grid)
}

/// Summary of a basin scan.
#[derive(Debug, Clone, PartialEq)]
pub struct BasinStats {
    pub cells: usize,
    pub unconverged_fraction: f64,
    pub unregistered_fraction: f64,
    /// Fraction of cells reaching each registered root, in registry order.
    pub root_fractions: Vec<f64>,
    /// Mean iteration count over converged cells (`None` if there are none).
    pub mean_iterations: Option<f64>,
}

pub fn basin_stats(grid: &BasinGrid) -> BasinStats {
    let n = grid.labels.len();
    let mut counts = vec![0usize; grid.num_roots + 2]; // [-1, 0, 1..K]
    let (mut sum, mut converged) = (0usize, 0usize);
    for (&l, &it) in grid.labels.iter().zip(&grid.iters) {
        counts[(l + 1) as usize] += 1;
        if l != UNCONVERGED {
            sum += it;
            converged += 1;
        }
    }
    let frac = |c: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
    BasinStats {
        cells: n,
        unconverged_fraction: frac(counts[1]),
        unregistered_fraction: frac(counts[0]),
        root_fractions: counts[2..].iter().map(|&c| frac(c)).collect(),
        mean_iterations: (converged > 0).then(|| sum as f64 / converged as f64),
    }
}
