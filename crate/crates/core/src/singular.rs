//! Quadrature for integrands with isolated endpoint/edge singularities.
//!
//! Elements touching a singular vertex are split recursively (bisection in
//! 1D, midpoint 4-split in 2D). At each level the children that touch no
//! singular vertex form a band whose integral is the level increment; the
//! remaining children are refined again. Increments of an integrable power
//! singularity decay geometrically, so the tail below the last level is
//! extrapolated from the last ratio. Increments that stop shrinking over
//! three successive levels mean divergence.

use crate::mesh::Mesh;
use crate::quadrature::QuadratureRule;

/// Exactness degrees used on the refinement bands (interval, triangle).
/// Every band sees the same scaled integrand, so its relative quadrature
/// error is paid at every level.
const BAND_DEGREE: [usize; 2] = [16, 8];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPolicy {
    /// Values of the weight below this count as zero.
    pub zero_threshold: f64,
    pub max_levels_1d: usize,
    pub max_levels_2d: usize,
    /// Increments are "not shrinking" when `I_k >= (1 - tol) I_{k-1}`.
    pub growth_tolerance: f64,
    /// Cap on simultaneously active (still refining) cells.
    pub max_active_cells: usize,
}

impl Default for SingularPolicy {
    fn default() -> Self {
        SingularPolicy {
            zero_threshold: 1e-14,
            max_levels_1d: 40,
            max_levels_2d: 12,
            growth_tolerance: 1e-3,
            max_active_cells: 1 << 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationMethod {
    Plain,
    SingularityAdapted,
}

/// Result of [`integrate_local`]: extrapolated per-element integrals.
#[derive(Debug, Clone)]
pub struct LocalIntegrals {
    /// `num_elements * ncomp` values.
    pub values: Vec<f64>,
    pub ncomp: usize,
    pub error: f64,
    pub method: IntegrationMethod,
    pub divergence: Option<String>,
    /// Aggregated absolute increment per refinement level.
    pub increments: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarIntegral {
    pub value: f64,
    pub error: f64,
    pub method: IntegrationMethod,
    pub divergent: bool,
}

/// A sub-cell described by barycentric coordinates of its vertices with
/// respect to the parent element.
#[derive(Clone, Copy)]
struct Cell {
    verts: [[f64; 3]; 3],
    singular: [bool; 3],
}

fn midpoint(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        0.5 * (a[0] + b[0]),
        0.5 * (a[1] + b[1]),
        0.5 * (a[2] + b[2]),
    ]
}

/// Integrates an `ncomp`-valued integrand over every element.
///
/// `singular(e, lambda, point)` flags points where the integrand blows up;
/// it is only asked about cell vertices. `f(e, lambda, point, out)` writes
/// the integrand into `out`. Non-finite integrand values at quadrature
/// points of cells that touch no flagged vertex mean divergence.
pub fn integrate_local<S, F>(
    mesh: &Mesh,
    rule: &QuadratureRule,
    policy: &SingularPolicy,
    ncomp: usize,
    singular: S,
    mut f: F,
) -> LocalIntegrals
where
    S: Fn(usize, &[f64], &[f64]) -> bool,
    F: FnMut(usize, &[f64], &[f64], &mut [f64]),
{
    let dim = mesh.dim();
    let nv = dim + 1;
    let ne = mesh.num_elements();
    let mut values = vec![0.0; ne * ncomp];
    let mut point = [0.0; 2];
    let mut scratch = vec![0.0; ncomp];
    let mut singular_elems: Vec<(usize, Cell)> = Vec::new();
    let mut divergence: Option<String> = None;

    let root = Cell {
        verts: if dim == 1 {
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0; 3]]
        } else {
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        },
        singular: [false; 3],
    };

    for e in 0..ne {
        let mut cell = root;
        for k in 0..nv {
            mesh.map_barycentric(e, &cell.verts[k][..nv], &mut point);
            cell.singular[k] = singular(e, &cell.verts[k][..nv], &point[..dim]);
        }
        if cell.singular[..nv].iter().any(|&s| s) {
            singular_elems.push((e, cell));
            continue;
        }
        let out = &mut values[e * ncomp..(e + 1) * ncomp];
        if let Err(msg) = integrate_cell(mesh, rule, e, &cell, ncomp, &mut f, &mut scratch, out) {
            divergence.get_or_insert(msg);
        }
    }

    if singular_elems.is_empty() || divergence.is_some() {
        return LocalIntegrals {
            values,
            ncomp,
            error: 0.0,
            method: IntegrationMethod::Plain,
            divergence,
            increments: Vec::new(),
        };
    }

    let max_levels = if dim == 1 {
        policy.max_levels_1d
    } else {
        policy.max_levels_2d
    };
    let band_rule = QuadratureRule::for_dim(dim, rule.exactness_degree().max(BAND_DEGREE[dim - 1]));
    // per singular element: increments per level, each of length ncomp
    let mut incs: Vec<Vec<Vec<f64>>> = vec![Vec::new(); singular_elems.len()];
    let mut active: Vec<(usize, Cell)> = singular_elems
        .iter()
        .enumerate()
        .map(|(i, &(_, c))| (i, c))
        .collect();
    let mut aggregate = Vec::new();

    'levels: for _level in 0..max_levels {
        if active.is_empty() || active.len() > policy.max_active_cells {
            break;
        }
        for inc in incs.iter_mut() {
            inc.push(vec![0.0; ncomp]);
        }
        let mut next = Vec::with_capacity(active.len() * 2);
        for &(i, cell) in &active {
            let e = singular_elems[i].0;
            if cell.singular[..nv].iter().all(|&s| s) {
                let mut centroid = [0.0; 3];
                for v in &cell.verts[..nv] {
                    for k in 0..3 {
                        centroid[k] += v[k] / nv as f64;
                    }
                }
                mesh.map_barycentric(e, &centroid[..nv], &mut point);
                f(e, &centroid[..nv], &point[..dim], &mut scratch);
                if scratch.iter().any(|v| !v.is_finite()) {
                    divergence = Some(format!("integrand is not finite at {:?}", &point[..dim]));
                    break 'levels;
                }
            }
            for child in split(mesh, e, &cell, dim, &singular) {
                if child.singular[..nv].iter().any(|&s| s) {
                    next.push((i, child));
                } else {
                    let level_inc = incs[i].last_mut().expect("level pushed above");
                    if let Err(msg) = integrate_cell(
                        mesh,
                        &band_rule,
                        e,
                        &child,
                        ncomp,
                        &mut f,
                        &mut scratch,
                        level_inc,
                    ) {
                        divergence = Some(msg);
                        break 'levels;
                    }
                }
            }
        }
        active = next;
        let total: f64 = incs
            .iter()
            .map(|inc| inc.last().unwrap().iter().map(|v| v.abs()).sum::<f64>())
            .sum();
        aggregate.push(total);
    }

    let levels = aggregate.len();
    let mut error = 0.0;
    if divergence.is_none() && levels >= 3 && !active.is_empty() {
        let (a1, a2, a3) = (
            aggregate[levels - 1],
            aggregate[levels - 2],
            aggregate[levels - 3],
        );
        let keep = 1.0 - policy.growth_tolerance;
        let accumulated: f64 = aggregate.iter().sum::<f64>();
        let negligible = a1 <= 1e-14 * accumulated || a1 == 0.0;
        if !negligible && a3 > 0.0 && a2 > 0.0 && a1 >= keep * a2 && a2 >= keep * a3 {
            divergence = Some(format!(
                "refinement increments stopped shrinking ({a3:.3e}, {a2:.3e}, {a1:.3e})"
            ));
        }
    }

    for (i, &(e, _)) in singular_elems.iter().enumerate() {
        let inc = &incs[i];
        for c in 0..ncomp {
            let series: Vec<f64> = inc.iter().map(|v| v[c]).collect();
            let sum: f64 = series.iter().sum();
            let (tail, tail_err) = if active.is_empty() {
                (0.0, 0.0)
            } else {
                geometric_tail(&series)
            };
            values[e * ncomp + c] += sum + tail;
            error += tail_err;
        }
    }

    LocalIntegrals {
        values,
        ncomp,
        error,
        method: IntegrationMethod::SingularityAdapted,
        divergence,
        increments: aggregate,
    }
}

/// Scalar convenience wrapper: total integral over the mesh.
pub fn integrate_scalar<S, F>(
    mesh: &Mesh,
    rule: &QuadratureRule,
    policy: &SingularPolicy,
    singular: S,
    f: F,
) -> ScalarIntegral
where
    S: Fn(usize, &[f64], &[f64]) -> bool,
    F: Fn(usize, &[f64], &[f64]) -> f64,
{
    let r = integrate_local(mesh, rule, policy, 1, singular, |e, l, p, out| {
        out[0] = f(e, l, p)
    });
    if r.divergence.is_some() {
        return ScalarIntegral {
            value: f64::INFINITY,
            error: f64::INFINITY,
            method: r.method,
            divergent: true,
        };
    }
    let value: f64 = r.values.iter().sum();
    ScalarIntegral {
        value,
        error: r.error + 1e-15 * value.abs(),
        method: r.method,
        divergent: false,
    }
}

/// Sum of the remaining geometric series after the last increment, with
/// the spread between the last two ratio estimates as the error.
fn geometric_tail(series: &[f64]) -> (f64, f64) {
    let n = series.len();
    let last = series.last().copied().unwrap_or(0.0);
    if last == 0.0 {
        return (0.0, 0.0);
    }
    let tail = |r: f64| (r > 0.0 && r < 1.0).then(|| last * r / (1.0 - r));
    let ratio = |i: usize| series[i] / series[i - 1];
    match (n >= 2).then(|| tail(ratio(n - 1))).flatten() {
        Some(t) => {
            let err = match (n >= 3).then(|| tail(ratio(n - 2))).flatten() {
                Some(alt) if alt.is_finite() => (t - alt).abs(),
                _ => t.abs(),
            };
            (t, err)
        }
        None => (0.0, last.abs()),
    }
}

fn split<S>(mesh: &Mesh, e: usize, cell: &Cell, dim: usize, singular: &S) -> Vec<Cell>
where
    S: Fn(usize, &[f64], &[f64]) -> bool,
{
    let nv = dim + 1;
    let mut point = [0.0; 2];
    let mut flag = |lam: &[f64; 3]| {
        mesh.map_barycentric(e, &lam[..nv], &mut point);
        singular(e, &lam[..nv], &point[..dim])
    };
    let [a, b, c] = cell.verts;
    let [sa, sb, sc] = cell.singular;
    if dim == 1 {
        let m = midpoint(&a, &b);
        let sm = flag(&m);
        vec![
            Cell {
                verts: [a, m, [0.0; 3]],
                singular: [sa, sm, false],
            },
            Cell {
                verts: [m, b, [0.0; 3]],
                singular: [sm, sb, false],
            },
        ]
    } else {
        let (ab, bc, ca) = (midpoint(&a, &b), midpoint(&b, &c), midpoint(&c, &a));
        let (sab, sbc, sca) = (flag(&ab), flag(&bc), flag(&ca));
        vec![
            Cell {
                verts: [a, ab, ca],
                singular: [sa, sab, sca],
            },
            Cell {
                verts: [ab, b, bc],
                singular: [sab, sb, sbc],
            },
            Cell {
                verts: [ca, bc, c],
                singular: [sca, sbc, sc],
            },
            Cell {
                verts: [ab, bc, ca],
                singular: [sab, sbc, sca],
            },
        ]
    }
}

#[allow(clippy::too_many_arguments)]
fn integrate_cell<F>(
    mesh: &Mesh,
    rule: &QuadratureRule,
    e: usize,
    cell: &Cell,
    ncomp: usize,
    f: &mut F,
    scratch: &mut [f64],
    out: &mut [f64],
) -> Result<(), String>
where
    F: FnMut(usize, &[f64], &[f64], &mut [f64]),
{
    let dim = mesh.dim();
    let nv = dim + 1;
    // sub-cell measure relative to the parent
    let ratio = if dim == 1 {
        (cell.verts[1][1] - cell.verts[0][1]).abs()
    } else {
        let [a, b, c] = cell.verts;
        ((b[1] - a[1]) * (c[2] - a[2]) - (c[1] - a[1]) * (b[2] - a[2])).abs()
    };
    let scale = mesh.element_measure(e) * ratio / rule.reference_measure();
    let mut point = [0.0; 2];
    for q in 0..rule.len() {
        let rho = rule.barycentric(q);
        let mut lam = [0.0; 3];
        for k in 0..nv {
            for j in 0..nv {
                lam[j] += rho[k] * cell.verts[k][j];
            }
        }
        mesh.map_barycentric(e, &lam[..nv], &mut point);
        f(e, &lam[..nv], &point[..dim], &mut scratch[..ncomp]);
        let w = rule.weights()[q] * scale;
        for c in 0..ncomp {
            let v = scratch[c];
            if !v.is_finite() {
                return Err(format!(
                    "integrand is not finite ({v}) at {:?}",
                    &point[..dim]
                ));
            }
            out[c] += w * v;
        }
    }
    Ok(())
}
