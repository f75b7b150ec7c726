//! Simplicial meshes of intervals and axis-aligned rectangles.
//!
//! Nodes and cells are stored flat: node `i` occupies `coords[i*dim..(i+1)*dim]`
//! and element `e` occupies `cells[e*(dim+1)..(e+1)*(dim+1)]`. Triangles are
//! oriented counter-clockwise.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Relative tolerance used for boundary tagging and point containment.
const GEOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Rectangle { x: (f64, f64), y: (f64, f64) },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
        }
    }

    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => b - a,
            Domain::Rectangle { x, y } => (x.1 - x.0) * (y.1 - y.0),
        }
    }

    /// Largest side length; sets the scale for geometric tolerances.
    pub fn extent(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => b - a,
            Domain::Rectangle { x, y } => (x.1 - x.0).max(y.1 - y.0),
        }
    }

    fn tol(&self) -> f64 {
        GEOM_TOL * self.extent().max(1.0)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        let tol = self.tol();
        match *self {
            Domain::Interval { a, b } => p[0] >= a - tol && p[0] <= b + tol,
            Domain::Rectangle { x, y } => {
                p[0] >= x.0 - tol && p[0] <= x.1 + tol && p[1] >= y.0 - tol && p[1] <= y.1 + tol
            }
        }
    }

    pub fn on_boundary(&self, p: &[f64]) -> bool {
        let tol = self.tol();
        match *self {
            Domain::Interval { a, b } => (p[0] - a).abs() <= tol || (p[0] - b).abs() <= tol,
            Domain::Rectangle { x, y } => {
                self.contains(p)
                    && ((p[0] - x.0).abs() <= tol
                        || (p[0] - x.1).abs() <= tol
                        || (p[1] - y.0).abs() <= tol
                        || (p[1] - y.1).abs() <= tol)
            }
        }
    }
}

/// Geometry of one P1 element: measure and the constant gradients of its
/// barycentric basis functions (unused entries are zero in 1D).
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub measure: f64,
    pub grads: [[f64; 2]; 3],
}

#[derive(Debug, Clone)]
pub struct Mesh {
    domain: Domain,
    coords: Vec<f64>,
    cells: Vec<usize>,
    boundary: Vec<bool>,
    boundary_nodes: Vec<usize>,
    measures: Vec<f64>,
    locator: Option<BucketGrid>,
}

/// Uniform mesh of `[a, b]` with `m` elements.
pub fn build_interval_mesh(a: f64, b: f64, m: usize) -> Result<Mesh> {
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::InvalidMesh(format!(
            "interval [{a}, {b}] is empty or non-finite"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidMesh(
            "element count must be at least 1".into(),
        ));
    }
    let h = (b - a) / m as f64;
    let mut coords: Vec<f64> = (0..=m).map(|i| a + h * i as f64).collect();
    coords[m] = b;
    let cells = (0..m).flat_map(|e| [e, e + 1]).collect();
    Mesh::from_parts(Domain::Interval { a, b }, coords, cells)
}

/// Structured triangulation of `x × y` with `mx × my` cells, each split
/// along its lower-left to upper-right diagonal.
pub fn build_rectangle_mesh(x: (f64, f64), y: (f64, f64), mx: usize, my: usize) -> Result<Mesh> {
    let finite = [x.0, x.1, y.0, y.1].iter().all(|v| v.is_finite());
    if !finite || x.0 >= x.1 || y.0 >= y.1 {
        return Err(Error::InvalidMesh(format!(
            "degenerate rectangle {x:?} × {y:?}"
        )));
    }
    if mx == 0 || my == 0 {
        return Err(Error::InvalidMesh(
            "element counts must be at least 1".into(),
        ));
    }
    let hx = (x.1 - x.0) / mx as f64;
    let hy = (y.1 - y.0) / my as f64;
    let mut coords = Vec::with_capacity(2 * (mx + 1) * (my + 1));
    for j in 0..=my {
        let yj = if j == my { y.1 } else { y.0 + hy * j as f64 };
        for i in 0..=mx {
            let xi = if i == mx { x.1 } else { x.0 + hx * i as f64 };
            coords.push(xi);
            coords.push(yj);
        }
    }
    let idx = |i: usize, j: usize| j * (mx + 1) + i;
    let mut cells = Vec::with_capacity(6 * mx * my);
    for j in 0..my {
        for i in 0..mx {
            let (n00, n10, n01, n11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
            cells.extend_from_slice(&[n00, n10, n11, n00, n11, n01]);
        }
    }
    Mesh::from_parts(Domain::Rectangle { x, y }, coords, cells)
}

/// Bisects every interval or splits every triangle into four through its
/// edge midpoints.
pub fn refine_uniform(mesh: &Mesh) -> Result<Mesh> {
    match mesh.domain {
        Domain::Interval { .. } => {
            let n = mesh.num_nodes();
            let mut coords = Vec::with_capacity(2 * n - 1);
            for i in 0..n - 1 {
                coords.push(mesh.coords[i]);
                coords.push(0.5 * (mesh.coords[i] + mesh.coords[i + 1]));
            }
            coords.push(mesh.coords[n - 1]);
            let m = coords.len() - 1;
            let cells = (0..m).flat_map(|e| [e, e + 1]).collect();
            Mesh::from_parts(mesh.domain, coords, cells)
        }
        Domain::Rectangle { .. } => {
            let mut coords = mesh.coords.clone();
            let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
            let mut midpoint = |a: usize, b: usize, coords: &mut Vec<f64>| -> usize {
                let key = (a.min(b), a.max(b));
                *midpoints.entry(key).or_insert_with(|| {
                    let id = coords.len() / 2;
                    let mx = 0.5 * (coords[2 * a] + coords[2 * b]);
                    let my = 0.5 * (coords[2 * a + 1] + coords[2 * b + 1]);
                    coords.push(mx);
                    coords.push(my);
                    id
                })
            };
            let mut cells = Vec::with_capacity(4 * mesh.cells.len());
            for e in 0..mesh.num_elements() {
                let [a, b, c] = [
                    mesh.cells[3 * e],
                    mesh.cells[3 * e + 1],
                    mesh.cells[3 * e + 2],
                ];
                let ab = midpoint(a, b, &mut coords);
                let bc = midpoint(b, c, &mut coords);
                let ca = midpoint(c, a, &mut coords);
                cells.extend_from_slice(&[a, ab, ca, ab, b, bc, ca, bc, c, ab, bc, ca]);
            }
            Mesh::from_parts(mesh.domain, coords, cells)
        }
    }
}

impl Mesh {
    fn from_parts(domain: Domain, coords: Vec<f64>, cells: Vec<usize>) -> Result<Mesh> {
        let dim = domain.dim();
        let nn = coords.len() / dim;
        let boundary: Vec<bool> = (0..nn)
            .map(|i| domain.on_boundary(&coords[i * dim..(i + 1) * dim]))
            .collect();
        let boundary_nodes = (0..nn).filter(|&i| boundary[i]).collect();
        let mut mesh = Mesh {
            domain,
            coords,
            cells,
            boundary,
            boundary_nodes,
            measures: Vec::new(),
            locator: None,
        };
        let mut measures = Vec::with_capacity(mesh.num_elements());
        for e in 0..mesh.num_elements() {
            let m = mesh.compute_measure(e);
            if !(m > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "element {e} has non-positive measure {m:e}"
                )));
            }
            measures.push(m);
        }
        mesh.measures = measures;
        if dim == 2 {
            mesh.locator = Some(BucketGrid::new(&mesh));
        }
        Ok(mesh)
    }

    fn compute_measure(&self, e: usize) -> f64 {
        let c = self.cell(e);
        match self.dim() {
            1 => self.node(c[1])[0] - self.node(c[0])[0],
            _ => {
                let (p0, p1, p2) = (self.node(c[0]), self.node(c[1]), self.node(c[2]));
                0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len() / self.dim()
    }

    pub fn num_elements(&self) -> usize {
        self.cells.len() / (self.dim() + 1)
    }

    pub fn node(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn cell(&self, e: usize) -> &[usize] {
        let k = self.dim() + 1;
        &self.cells[e * k..(e + 1) * k]
    }

    pub fn element_measure(&self, e: usize) -> f64 {
        self.measures[e]
    }

    pub fn element_measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn total_measure(&self) -> f64 {
        self.measures.iter().sum()
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes())
            .filter(|&i| !self.boundary[i])
            .collect()
    }

    /// Largest element diameter.
    pub fn mesh_size(&self) -> f64 {
        (0..self.num_elements())
            .map(|e| {
                let c = self.cell(e);
                let mut h: f64 = 0.0;
                for a in 0..c.len() {
                    for b in a + 1..c.len() {
                        h = h.max(dist(self.node(c[a]), self.node(c[b])));
                    }
                }
                h
            })
            .fold(0.0, f64::max)
    }

    pub fn geometry(&self, e: usize) -> ElementGeometry {
        let c = self.cell(e);
        let measure = self.measures[e];
        let mut grads = [[0.0; 2]; 3];
        match self.dim() {
            1 => {
                grads[0][0] = -1.0 / measure;
                grads[1][0] = 1.0 / measure;
            }
            _ => {
                let (p0, p1, p2) = (self.node(c[0]), self.node(c[1]), self.node(c[2]));
                let inv = 1.0 / (2.0 * measure);
                grads[0] = [(p1[1] - p2[1]) * inv, (p2[0] - p1[0]) * inv];
                grads[1] = [(p2[1] - p0[1]) * inv, (p0[0] - p2[0]) * inv];
                grads[2] = [(p0[1] - p1[1]) * inv, (p1[0] - p0[0]) * inv];
            }
        }
        ElementGeometry { measure, grads }
    }

    /// Physical point for barycentric coordinates `lambda` on element `e`.
    pub fn map_barycentric(&self, e: usize, lambda: &[f64], out: &mut [f64]) {
        let c = self.cell(e);
        let d = self.dim();
        out[..d].iter_mut().for_each(|v| *v = 0.0);
        for (k, &l) in lambda.iter().enumerate() {
            let p = self.node(c[k]);
            for i in 0..d {
                out[i] += l * p[i];
            }
        }
    }

    /// Element containing `p` and the barycentric coordinates of `p` in it.
    pub fn locate(&self, p: &[f64]) -> Result<(usize, [f64; 3])> {
        if p.len() < self.dim() || !self.domain.contains(p) {
            return Err(Error::OutsideDomain { point: p.to_vec() });
        }
        match self.dim() {
            1 => {
                let x = p[0];
                let n = self.num_nodes();
                let pos = self.coords.partition_point(|&c| c <= x);
                let e = pos.clamp(1, n - 1) - 1;
                let (x0, x1) = (self.coords[e], self.coords[e + 1]);
                let t = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
                Ok((e, [1.0 - t, t, 0.0]))
            }
            _ => {
                let grid = self.locator.as_ref().expect("2D meshes carry a locator");
                let mut best: Option<(usize, [f64; 3], f64)> = None;
                for &e in grid.candidates(p) {
                    let lam = self.barycentric(e, p);
                    let worst = lam.iter().cloned().fold(f64::INFINITY, f64::min);
                    if best.is_none_or(|b| worst > b.2) {
                        best = Some((e, lam, worst));
                    }
                    if worst >= 0.0 {
                        break;
                    }
                }
                match best {
                    Some((e, lam, worst)) if worst >= -1e-9 => {
                        let mut l = lam.map(|v| v.max(0.0));
                        let s: f64 = l.iter().sum();
                        l.iter_mut().for_each(|v| *v /= s);
                        Ok((e, l))
                    }
                    _ => Err(Error::OutsideDomain { point: p.to_vec() }),
                }
            }
        }
    }

    fn barycentric(&self, e: usize, p: &[f64]) -> [f64; 3] {
        let g = self.geometry(e);
        let p0 = self.node(self.cell(e)[0]);
        let l1 = g.grads[1][0] * (p[0] - p0[0]) + g.grads[1][1] * (p[1] - p0[1]);
        let l2 = g.grads[2][0] * (p[0] - p0[0]) + g.grads[2][1] * (p[1] - p0[1]);
        [1.0 - l1 - l2, l1, l2]
    }

    /// Checks that every shared face has identical node indices on both
    /// sides and every unshared face lies on the boundary.
    pub fn is_conforming(&self) -> bool {
        match self.dim() {
            1 => {
                let mut count = vec![0usize; self.num_nodes()];
                for e in 0..self.num_elements() {
                    for &v in self.cell(e) {
                        count[v] += 1;
                    }
                }
                (0..self.num_nodes()).all(|i| match count[i] {
                    1 => self.boundary[i],
                    2 => !self.boundary[i],
                    _ => false,
                })
            }
            _ => {
                let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
                for e in 0..self.num_elements() {
                    let c = self.cell(e);
                    for k in 0..3 {
                        let (a, b) = (c[k], c[(k + 1) % 3]);
                        *edges.entry((a.min(b), a.max(b))).or_default() += 1;
                    }
                }
                edges.iter().all(|(&(a, b), &n)| match n {
                    1 => {
                        let (pa, pb) = (self.node(a), self.node(b));
                        let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                        self.boundary[a] && self.boundary[b] && self.domain.on_boundary(&mid)
                    }
                    2 => true,
                    _ => false,
                })
            }
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Uniform bucket grid over the bounding rectangle; each bucket lists the
/// triangles whose bounding boxes overlap it.
#[derive(Debug, Clone)]
struct BucketGrid {
    origin: [f64; 2],
    size: [f64; 2],
    nb: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl BucketGrid {
    fn new(mesh: &Mesh) -> BucketGrid {
        let Domain::Rectangle { x, y } = mesh.domain else {
            unreachable!("bucket grids are only built for rectangles")
        };
        let side = ((mesh.num_elements() as f64 / 2.0).sqrt().ceil() as usize).max(1);
        let nb = [side, side];
        let size = [(x.1 - x.0) / side as f64, (y.1 - y.0) / side as f64];
        let origin = [x.0, y.0];
        let mut buckets = vec![Vec::new(); side * side];
        for e in 0..mesh.num_elements() {
            let c = mesh.cell(e);
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for &v in c {
                let p = mesh.node(v);
                for k in 0..2 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
            let (i0, j0) = Self::index(origin, size, nb, &lo);
            let (i1, j1) = Self::index(origin, size, nb, &hi);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * side + i].push(e);
                }
            }
        }
        BucketGrid {
            origin,
            size,
            nb,
            buckets,
        }
    }

    fn index(origin: [f64; 2], size: [f64; 2], nb: [usize; 2], p: &[f64]) -> (usize, usize) {
        let f =
            |k: usize| (((p[k] - origin[k]) / size[k]).floor().max(0.0) as usize).min(nb[k] - 1);
        (f(0), f(1))
    }

    fn candidates(&self, p: &[f64]) -> &[usize] {
        let (i, j) = Self::index(self.origin, self.size, self.nb, p);
        &self.buckets[j * self.nb[0] + i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_two_elements() {
        let m = build_interval_mesh(0.0, 1.0, 2).unwrap();
        assert_eq!(m.num_nodes(), 3);
        assert_eq!([m.node(0)[0], m.node(1)[0], m.node(2)[0]], [0.0, 0.5, 1.0]);
        assert_eq!(m.boundary_nodes(), &[0, 2]);
    }

    #[test]
    fn interval_measures() {
        let m = build_interval_mesh(0.0, 1.0, 4).unwrap();
        assert!(m
            .element_measures()
            .iter()
            .all(|&h| (h - 0.25).abs() < 1e-15));
        assert!((m.total_measure() - 1.0).abs() < 1e-12);
        let m = build_interval_mesh(-1.0, 1.0, 10).unwrap();
        assert_eq!(m.num_nodes(), 11);
        assert!((m.total_measure() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn interval_rejects_bad_input() {
        assert!(build_interval_mesh(1.0, 1.0, 3).is_err());
        assert!(build_interval_mesh(2.0, 1.0, 3).is_err());
        assert!(build_interval_mesh(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn rectangle_counts() {
        let m = build_rectangle_mesh((0.0, 1.0), (0.0, 1.0), 1, 1).unwrap();
        assert_eq!(
            (m.num_elements(), m.num_nodes(), m.boundary_nodes().len()),
            (2, 4, 4)
        );
        let m = build_rectangle_mesh((0.0, 1.0), (0.0, 1.0), 2, 2).unwrap();
        assert_eq!((m.num_elements(), m.num_nodes()), (8, 9));
        assert_eq!(m.interior_nodes(), vec![4]);
        assert!(m.is_conforming());
        for (mx, my) in [(3, 5), (7, 2), (16, 16)] {
            let m = build_rectangle_mesh((0.0, 1.0), (0.0, 1.0), mx, my).unwrap();
            assert!((m.total_measure() - 1.0).abs() < 1e-12);
        }
        assert!(build_rectangle_mesh((0.0, 0.0), (0.0, 1.0), 2, 2).is_err());
        assert!(build_rectangle_mesh((0.0, 1.0), (0.0, 1.0), 0, 2).is_err());
    }

    #[test]
    fn refinement() {
        let m = build_interval_mesh(0.0, 1.0, 2).unwrap();
        let r = refine_uniform(&m).unwrap();
        assert_eq!(r.num_elements(), 4);
        assert!((r.mesh_size() - 0.5 * m.mesh_size()).abs() < 1e-15);
        assert!(r.is_conforming());

        let m = build_rectangle_mesh((0.0, 1.0), (0.0, 1.0), 1, 1).unwrap();
        let r = refine_uniform(&m).unwrap();
        assert_eq!(r.num_elements(), 8);
        assert_eq!(r.num_nodes(), 9);
        assert_eq!(r.interior_nodes().len(), 1);
        assert!(r.is_conforming());
        let rr = refine_uniform(&r).unwrap();
        assert!(rr.is_conforming());
        assert!((rr.total_measure() - 1.0).abs() < 1e-12);
        assert_eq!(rr.boundary_nodes().len(), 16);
    }

    #[test]
    fn locate_points() {
        let m = build_rectangle_mesh((0.0, 2.0), (-1.0, 1.0), 4, 3).unwrap();
        for p in [[0.3, 0.2], [2.0, 1.0], [0.0, -1.0], [1.7, -0.99]] {
            let (e, lam) = m.locate(&p).unwrap();
            let mut q = [0.0; 2];
            m.map_barycentric(e, &lam, &mut q);
            assert!((q[0] - p[0]).abs() < 1e-12 && (q[1] - p[1]).abs() < 1e-12);
        }
        assert!(m.locate(&[2.1, 0.0]).is_err());
        let m = build_interval_mesh(0.0, 1.0, 2).unwrap();
        assert!(m.locate(&[1.0 + 1e-13]).is_ok());
        assert!(m.locate(&[-0.01]).is_err());
    }
}
