//! Linear-triangle meshes: benchmark geometry generation, shape-function
//! gradients, quadrature data, and the text mesh file format.
//!
//! The generators build tensor grids (optionally graded toward the expected
//! crack path), split each cell into two triangles with alternating
//! diagonals, carve rectangular cutouts, and model notches as explicit slits
//! by duplicating the nodes on the notch faces.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

const COORD_TOL: f64 = 1e-9;

/// Immutable T3 mesh with named node sets.
#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 3]>,
    node_sets: BTreeMap<String, Vec<usize>>,
    thickness: f64,
}

/// Per-element quadrature data: one centroid Gauss point, constant shape
/// gradients for the three linear interpolants.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    /// Element area [mm^2].
    pub area: f64,
    /// grad N_i, one (d/dx, d/dy) pair per node [1/mm].
    pub shape_grads: [[f64; 2]; 3],
    /// Shape values at the centroid point; each 1/3.
    pub centroid_shape_values: [f64; 3],
}

impl Mesh {
    pub fn new(
        nodes: Vec<[f64; 2]>,
        elements: Vec<[usize; 3]>,
        node_sets: BTreeMap<String, Vec<usize>>,
        thickness: f64,
    ) -> Result<Self> {
        if !(thickness > 0.0) {
            return Err(Error::Mesh(format!("thickness must be positive, got {thickness}")));
        }
        let n = nodes.len();
        for (e, conn) in elements.iter().enumerate() {
            let [i, j, k] = *conn;
            if i >= n || j >= n || k >= n {
                return Err(Error::Mesh(format!("element {e} references node out of range")));
            }
            if i == j || j == k || i == k {
                return Err(Error::Mesh(format!("element {e} has repeated node indices")));
            }
            let area = signed_area(&nodes[i], &nodes[j], &nodes[k]);
            if area <= 0.0 {
                return Err(Error::Mesh(format!(
                    "element {e} has non-positive signed area {area:.3e} (must be counter-clockwise)"
                )));
            }
        }
        for (name, set) in &node_sets {
            if set.iter().any(|&i| i >= n) {
                return Err(Error::Mesh(format!("node set '{name}' contains out-of-range index")));
            }
        }
        Ok(Self { nodes, elements, node_sets, thickness })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn element(&self, e: usize) -> [usize; 3] {
        self.elements[e]
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn thickness(&self) -> f64 {
        self.thickness
    }

    pub fn set_thickness(&mut self, t: f64) -> Result<()> {
        if !(t > 0.0) {
            return Err(Error::Mesh(format!("thickness must be positive, got {t}")));
        }
        self.thickness = t;
        Ok(())
    }

    pub fn node_set(&self, name: &str) -> Result<&[usize]> {
        self.node_sets
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::Mesh(format!("missing node set '{name}'")))
    }

    pub fn node_set_names(&self) -> impl Iterator<Item = &str> {
        self.node_sets.keys().map(|s| s.as_str())
    }

    pub fn element_centroid(&self, e: usize) -> [f64; 2] {
        let [i, j, k] = self.elements[e];
        let (a, b, c) = (self.nodes[i], self.nodes[j], self.nodes[k]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Area, constant shape gradients, and centroid shape values of one
    /// element. Exact for linear interpolants.
    pub fn element_geometry(&self, e: usize) -> Result<ElementGeometry> {
        let [i, j, k] = self.elements[e];
        let (p1, p2, p3) = (self.nodes[i], self.nodes[j], self.nodes[k]);
        let area = signed_area(&p1, &p2, &p3);
        if area < 1e-14 {
            return Err(Error::DegenerateElement { index: e, area });
        }
        let s = 1.0 / (2.0 * area);
        let shape_grads = [
            [(p2[1] - p3[1]) * s, (p3[0] - p2[0]) * s],
            [(p3[1] - p1[1]) * s, (p1[0] - p3[0]) * s],
            [(p1[1] - p2[1]) * s, (p2[0] - p1[0]) * s],
        ];
        Ok(ElementGeometry {
            area,
            shape_grads,
            centroid_shape_values: [1.0 / 3.0; 3],
        })
    }

    pub fn total_area(&self) -> f64 {
        (0..self.elements.len())
            .map(|e| {
                let [i, j, k] = self.elements[e];
                signed_area(&self.nodes[i], &self.nodes[j], &self.nodes[k])
            })
            .sum()
    }

    /// Serialize to the `microfrac-mesh v1` text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("microfrac-mesh v1\n");
        let _ = writeln!(out, "nodes {}", self.nodes.len());
        for n in &self.nodes {
            let _ = writeln!(out, "{} {}", n[0], n[1]);
        }
        let _ = writeln!(out, "elements {}", self.elements.len());
        for e in &self.elements {
            let _ = writeln!(out, "{} {} {}", e[0], e[1], e[2]);
        }
        for (name, set) in &self.node_sets {
            let _ = writeln!(out, "nodeset {} {}", name, set.len());
            for chunk in set.chunks(12) {
                let line: Vec<String> = chunk.iter().map(|i| i.to_string()).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
        out
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        if header.trim() != "microfrac-mesh v1" {
            return Err(Error::Mesh(format!("bad mesh header: '{header}'")));
        }
        let mut tokens = lines.flat_map(|l| l.split_whitespace());
        fn take<'a>(tokens: &mut impl Iterator<Item = &'a str>, what: &str) -> Result<String> {
            tokens
                .next()
                .map(str::to_owned)
                .ok_or_else(|| Error::Mesh(format!("unexpected end of mesh file, expected {what}")))
        }
        fn expect_kw(tok: &str, kw: &str) -> Result<()> {
            if tok != kw {
                return Err(Error::Mesh(format!("expected '{kw}', found '{tok}'")));
            }
            Ok(())
        }

        expect_kw(&take(&mut tokens, "'nodes'")?, "nodes")?;
        let n: usize = parse(&take(&mut tokens, "node count")?)?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = parse(&take(&mut tokens, "node x")?)?;
            let y: f64 = parse(&take(&mut tokens, "node y")?)?;
            nodes.push([x, y]);
        }
        expect_kw(&take(&mut tokens, "'elements'")?, "elements")?;
        let m: usize = parse(&take(&mut tokens, "element count")?)?;
        let mut elements = Vec::with_capacity(m);
        for _ in 0..m {
            let i: usize = parse(&take(&mut tokens, "element index")?)?;
            let j: usize = parse(&take(&mut tokens, "element index")?)?;
            let k: usize = parse(&take(&mut tokens, "element index")?)?;
            elements.push([i, j, k]);
        }
        let mut node_sets = BTreeMap::new();
        while let Some(tok) = tokens.next() {
            expect_kw(tok, "nodeset")?;
            let name = take(&mut tokens, "node set name")?;
            let count: usize = parse(&take(&mut tokens, "node set count")?)?;
            let mut set = Vec::with_capacity(count);
            for _ in 0..count {
                set.push(parse::<usize>(&take(&mut tokens, "node set index")?)?);
            }
            node_sets.insert(name, set);
        }
        Mesh::new(nodes, elements, node_sets, 1.0)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }
}

fn parse<T: std::str::FromStr>(tok: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::Mesh(format!("cannot parse token '{tok}' in mesh file")))
}

fn signed_area(p1: &[f64; 2], p2: &[f64; 2], p3: &[f64; 2]) -> f64 {
    0.5 * ((p2[0] - p1[0]) * (p3[1] - p1[1]) - (p3[0] - p1[0]) * (p2[1] - p1[1]))
}

/// The four benchmark geometries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkCase {
    Sent,
    Sens,
    LPanel,
    Tpb,
}

impl BenchmarkCase {
    pub fn default_thickness(self) -> f64 {
        match self {
            BenchmarkCase::Sent | BenchmarkCase::Sens => 1.0,
            BenchmarkCase::LPanel | BenchmarkCase::Tpb => 100.0,
        }
    }

    /// Default refinement band on the grading axis (y for all cases except
    /// the bending beam, whose crack runs vertically).
    fn default_band(self) -> (f64, f64) {
        match self {
            BenchmarkCase::Sent => (0.44, 0.56),
            BenchmarkCase::Sens => (0.20, 0.56),
            BenchmarkCase::LPanel => (235.0, 300.0),
            BenchmarkCase::Tpb => (212.5, 237.5),
        }
    }
}

/// Mesh-generation options: refinement toward the expected crack path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshOptions {
    /// Grade the mesh toward the expected crack band.
    pub refine: bool,
    /// In-band element size is h / factor.
    pub factor: f64,
    /// Band on the case's grading axis; None picks the case default.
    pub band: Option<(f64, f64)>,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self { refine: true, factor: 4.0, band: None }
    }
}

pub fn generate_sent_mesh(h: f64) -> Result<Mesh> {
    generate_case_mesh(BenchmarkCase::Sent, h, &MeshOptions::default())
}

pub fn generate_sens_mesh(h: f64) -> Result<Mesh> {
    generate_case_mesh(BenchmarkCase::Sens, h, &MeshOptions::default())
}

pub fn generate_lpanel_mesh(h: f64) -> Result<Mesh> {
    generate_case_mesh(BenchmarkCase::LPanel, h, &MeshOptions::default())
}

pub fn generate_tpb_mesh(h: f64) -> Result<Mesh> {
    generate_case_mesh(BenchmarkCase::Tpb, h, &MeshOptions::default())
}

pub fn generate_case_mesh(case: BenchmarkCase, h: f64, opts: &MeshOptions) -> Result<Mesh> {
    if !(h > 0.0) {
        return Err(Error::Mesh(format!("target edge length must be positive, got {h}")));
    }
    if opts.refine && !(opts.factor >= 1.0) {
        return Err(Error::Mesh(format!("refinement factor must be >= 1, got {}", opts.factor)));
    }
    let band = opts.band.unwrap_or_else(|| case.default_band());
    if band.0 >= band.1 {
        return Err(Error::Mesh(format!("empty refinement band [{}, {}]", band.0, band.1)));
    }
    let fine = if opts.refine { h / opts.factor } else { h };
    match case {
        BenchmarkCase::Sent | BenchmarkCase::Sens => {
            if h >= 0.5 {
                return Err(Error::Mesh(format!(
                    "h = {h} too coarse for the unit square with a 0.5 mm notch"
                )));
            }
            let xs = graded_axis(0.0, 1.0, h, fine, &[], &[0.5])?;
            let y_fine: &[(f64, f64)] = if opts.refine { &[band] } else { &[] };
            let ys = graded_axis(0.0, 1.0, h, fine, y_fine, &[0.5])?;
            let (mut nodes, mut elements) = structured_triangles(&xs, &ys, |_, _| true);
            duplicate_slit_nodes(&mut nodes, &mut elements, 0.5, 0.5);
            let mut sets = BTreeMap::new();
            sets.insert("bottom".into(), nodes_on_line(&nodes, 1, 0.0));
            sets.insert("top".into(), nodes_on_line(&nodes, 1, 1.0));
            sets.insert("left".into(), nodes_on_line(&nodes, 0, 0.0));
            sets.insert("right".into(), nodes_on_line(&nodes, 0, 1.0));
            Mesh::new(nodes, elements, sets, case.default_thickness())
        }
        BenchmarkCase::LPanel => {
            if h > 30.0 {
                return Err(Error::Mesh(format!(
                    "h = {h} exceeds the 30 mm load edge of the L-panel"
                )));
            }
            let xs = graded_axis(0.0, 500.0, h, fine, &[], &[250.0, 470.0])?;
            let y_fine: &[(f64, f64)] = if opts.refine { &[band] } else { &[] };
            let ys = graded_axis(0.0, 500.0, h, fine, y_fine, &[250.0])?;
            // Keep everything except the lower-right quadrant.
            let (nodes, elements) =
                structured_triangles(&xs, &ys, |cx, cy| !(cx > 250.0 && cy < 250.0));
            let mut sets = BTreeMap::new();
            sets.insert("fixed_bottom".into(), nodes_on_line(&nodes, 1, 0.0));
            let load: Vec<usize> = nodes_on_line(&nodes, 1, 250.0)
                .into_iter()
                .filter(|&i| nodes[i][0] >= 470.0 - COORD_TOL)
                .collect();
            sets.insert("load_edge".into(), load);
            Mesh::new(nodes, elements, sets, case.default_thickness())
        }
        BenchmarkCase::Tpb => {
            if h > 5.0 {
                return Err(Error::Mesh(format!(
                    "h = {h} exceeds the 5 mm notch width of the bending beam"
                )));
            }
            let x_fine: &[(f64, f64)] = if opts.refine { &[band] } else { &[] };
            let xs = graded_axis(0.0, 450.0, h, fine, x_fine, &[222.5, 225.0, 227.5])?;
            let ys = graded_axis(0.0, 100.0, h, fine, &[], &[50.0])?;
            // Rectangular notch cutout at mid-span, 5 mm wide, 50 mm tall.
            let (nodes, elements) = structured_triangles(&xs, &ys, |cx, cy| {
                !(cx > 222.5 && cx < 227.5 && cy < 50.0)
            });
            let mut sets = BTreeMap::new();
            sets.insert("support_left".into(), nodes_at_point(&nodes, [0.0, 0.0])?);
            sets.insert("support_right".into(), nodes_at_point(&nodes, [450.0, 0.0])?);
            let load: Vec<usize> = nodes_on_line(&nodes, 1, 100.0)
                .into_iter()
                .filter(|&i| (nodes[i][0] - 225.0).abs() <= 10.0 + COORD_TOL)
                .collect();
            sets.insert("load_point".into(), load);
            Mesh::new(nodes, elements, sets, case.default_thickness())
        }
    }
}

/// 1D grid over [start, end]: spacing `fine` inside the fine ranges,
/// `coarse` elsewhere, geometric transitions in between. All `required`
/// coordinates (feature lines) appear exactly.
fn graded_axis(
    start: f64,
    end: f64,
    coarse: f64,
    fine: f64,
    fine_ranges: &[(f64, f64)],
    required: &[f64],
) -> Result<Vec<f64>> {
    let span = end - start;
    let tol = span * 1e-12;
    let mut brk = vec![start, end];
    for &r in required {
        if r > start + tol && r < end - tol {
            brk.push(r);
        }
    }
    for &(a, b) in fine_ranges {
        for v in [a, b] {
            if v > start + tol && v < end - tol {
                brk.push(v);
            }
        }
    }
    brk.sort_by(|a, b| a.partial_cmp(b).unwrap());
    brk.dedup_by(|a, b| (*a - *b).abs() <= tol);

    let in_fine = |x: f64| fine_ranges.iter().any(|&(a, b)| x > a - tol && x < b + tol);
    let targets: Vec<f64> = brk
        .windows(2)
        .map(|w| if in_fine(0.5 * (w[0] + w[1])) { fine } else { coarse })
        .collect();

    let mut coords = vec![start];
    for (i, w) in brk.windows(2).enumerate() {
        let h_left = if i == 0 { targets[i] } else { targets[i].min(targets[i - 1]) };
        let h_right = if i + 1 == targets.len() { targets[i] } else { targets[i].min(targets[i + 1]) };
        let spacings = fill_interval(w[1] - w[0], h_left, targets[i], h_right);
        let mut x = w[0];
        for s in &spacings[..spacings.len() - 1] {
            x += s;
            coords.push(x);
        }
        coords.push(w[1]); // breakpoint exactly, no cumulative drift
    }
    if coords.len() < 2 {
        return Err(Error::Mesh("axis grading produced fewer than two coordinates".into()));
    }
    Ok(coords)
}

/// Subdivide one interval: spacings start near h0, grow geometrically up to
/// `cap`, and shrink back toward h1; all spacings are rescaled to sum to
/// `len` exactly.
fn fill_interval(len: f64, h0: f64, cap: f64, h1: f64) -> Vec<f64> {
    const GROWTH: f64 = 1.4;
    let mut left: Vec<f64> = Vec::new();
    let mut right: Vec<f64> = Vec::new();
    let mut hl = h0.min(cap);
    let mut hr = h1.min(cap);
    let mut sum = 0.0;
    while sum < len && (hl < cap * 0.999 || hr < cap * 0.999) {
        if hl <= hr {
            left.push(hl);
            sum += hl;
            hl = (hl * GROWTH).min(cap);
        } else {
            right.push(hr);
            sum += hr;
            hr = (hr * GROWTH).min(cap);
        }
    }
    if sum < len {
        let n_mid = ((len - sum) / cap).round().max(1.0) as usize;
        for _ in 0..n_mid {
            left.push(cap);
            sum += cap;
        }
    }
    let mut spacings = left;
    spacings.extend(right.into_iter().rev());
    let scale = len / sum;
    for s in &mut spacings {
        *s *= scale;
    }
    spacings
}

/// Tensor-grid triangulation with alternating diagonals; cells whose
/// centroid fails `keep` are dropped and unused nodes compacted away.
fn structured_triangles(
    xs: &[f64],
    ys: &[f64],
    keep: impl Fn(f64, f64) -> bool,
) -> (Vec<[f64; 2]>, Vec<[usize; 3]>) {
    let nx = xs.len();
    let ny = ys.len();
    let id = |ix: usize, iy: usize| iy * nx + ix;
    let mut elements: Vec<[usize; 3]> = Vec::new();
    for iy in 0..ny - 1 {
        for ix in 0..nx - 1 {
            let cx = 0.5 * (xs[ix] + xs[ix + 1]);
            let cy = 0.5 * (ys[iy] + ys[iy + 1]);
            if !keep(cx, cy) {
                continue;
            }
            let (n00, n10) = (id(ix, iy), id(ix + 1, iy));
            let (n11, n01) = (id(ix + 1, iy + 1), id(ix, iy + 1));
            if (ix + iy) % 2 == 0 {
                elements.push([n00, n10, n11]);
                elements.push([n00, n11, n01]);
            } else {
                elements.push([n00, n10, n01]);
                elements.push([n10, n11, n01]);
            }
        }
    }
    // Compact unused grid nodes, preserving grid order.
    let mut used = vec![false; nx * ny];
    for e in &elements {
        for &i in e {
            used[i] = true;
        }
    }
    let mut remap = vec![usize::MAX; nx * ny];
    let mut nodes = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            let old = id(ix, iy);
            if used[old] {
                remap[old] = nodes.len();
                nodes.push([xs[ix], ys[iy]]);
            }
        }
    }
    for e in &mut elements {
        for i in e.iter_mut() {
            *i = remap[*i];
        }
    }
    (nodes, elements)
}

/// Explicit slit along y = y_line for x < x_tip: nodes on the line are
/// duplicated and elements above the line rewired to the duplicates, so the
/// two crack faces can separate.
fn duplicate_slit_nodes(
    nodes: &mut Vec<[f64; 2]>,
    elements: &mut [[usize; 3]],
    y_line: f64,
    x_tip: f64,
) {
    let mut dup: BTreeMap<usize, usize> = BTreeMap::new();
    for i in 0..nodes.len() {
        let [x, y] = nodes[i];
        if (y - y_line).abs() <= COORD_TOL && x < x_tip - COORD_TOL {
            dup.insert(i, nodes.len() + dup.len());
        }
    }
    let base = nodes.len();
    let dups: Vec<[f64; 2]> = dup.keys().map(|&i| nodes[i]).collect();
    nodes.extend(dups);
    debug_assert_eq!(nodes.len(), base + dup.len());

    for e in elements.iter_mut() {
        let [i, j, k] = *e;
        let cy = (nodes[i][1] + nodes[j][1] + nodes[k][1]) / 3.0;
        if cy > y_line {
            for v in e.iter_mut() {
                if let Some(&new) = dup.get(v) {
                    *v = new;
                }
            }
        }
    }
}

fn nodes_on_line(nodes: &[[f64; 2]], axis: usize, value: f64) -> Vec<usize> {
    nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| (n[axis] - value).abs() <= COORD_TOL * value.abs().max(1.0))
        .map(|(i, _)| i)
        .collect()
}

fn nodes_at_point(nodes: &[[f64; 2]], p: [f64; 2]) -> Result<Vec<usize>> {
    let hits: Vec<usize> = nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| {
            (n[0] - p[0]).abs() <= COORD_TOL * p[0].abs().max(1.0)
                && (n[1] - p[1]).abs() <= COORD_TOL * p[1].abs().max(1.0)
        })
        .map(|(i, _)| i)
        .collect();
    if hits.is_empty() {
        return Err(Error::Mesh(format!("no node at ({}, {})", p[0], p[1])));
    }
    Ok(hits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tri(points: [[f64; 2]; 3]) -> Mesh {
        Mesh::new(points.to_vec(), vec![[0, 1, 2]], BTreeMap::new(), 1.0).unwrap()
    }

    #[test]
    fn unit_right_triangle_geometry() {
        let m = tri([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let g = m.element_geometry(0).unwrap();
        assert_relative_eq!(g.area, 0.5);
        assert_eq!(g.shape_grads[0], [-1.0, -1.0]);
        assert_eq!(g.shape_grads[1], [1.0, 0.0]);
        assert_eq!(g.shape_grads[2], [0.0, 1.0]);
        let sum = [
            g.shape_grads[0][0] + g.shape_grads[1][0] + g.shape_grads[2][0],
            g.shape_grads[0][1] + g.shape_grads[1][1] + g.shape_grads[2][1],
        ];
        assert_eq!(sum, [0.0, 0.0]);
        assert_eq!(g.centroid_shape_values, [1.0 / 3.0; 3]);
    }

    #[test]
    fn scaled_triangle_geometry() {
        let m = tri([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]);
        let g = m.element_geometry(0).unwrap();
        assert_relative_eq!(g.area, 2.0);
        assert_relative_eq!(g.shape_grads[0][0], -0.5);
        assert_relative_eq!(g.shape_grads[0][1], -0.5);
    }

    #[test]
    fn degenerate_element_reports_index() {
        // Collinear nodes are rejected at construction, naming the element.
        let err = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            vec![[0, 1, 2]],
            BTreeMap::new(),
            1.0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("element 0"));
        // A nearly-degenerate but CCW sliver still fails element_geometry.
        let m = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.5, 1e-15]],
            vec![[0, 1, 2]],
            BTreeMap::new(),
            1.0,
        )
        .unwrap();
        let err = m.element_geometry(0).unwrap_err();
        assert!(matches!(err, Error::DegenerateElement { index: 0, .. }));
    }

    #[test]
    fn clockwise_element_rejected() {
        assert!(Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 2, 1]],
            BTreeMap::new(),
            1.0,
        )
        .is_err());
    }

    #[test]
    fn linear_field_gradient_is_exact() {
        // Interpolating f = 3x - 2y + 1 reproduces grad f = (3, -2).
        let m = generate_sent_mesh(0.26).unwrap();
        for e in 0..m.num_elements() {
            let g = m.element_geometry(e).unwrap();
            let conn = m.element(e);
            let mut grad = [0.0, 0.0];
            for (a, &n) in conn.iter().enumerate() {
                let [x, y] = m.node(n);
                let f = 3.0 * x - 2.0 * y + 1.0;
                grad[0] += f * g.shape_grads[a][0];
                grad[1] += f * g.shape_grads[a][1];
            }
            assert_relative_eq!(grad[0], 3.0, epsilon = 1e-10);
            assert_relative_eq!(grad[1], -2.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn sent_mesh_bounding_box_and_slit() {
        let m = generate_sent_mesh(0.25).unwrap();
        for n in m.nodes() {
            assert!(n[0] >= -1e-12 && n[0] <= 1.0 + 1e-12);
            assert!(n[1] >= -1e-12 && n[1] <= 1.0 + 1e-12);
        }
        // Nodes on the notch line left of the tip appear exactly twice.
        let mut on_slit: BTreeMap<i64, usize> = BTreeMap::new();
        for n in m.nodes() {
            if (n[1] - 0.5).abs() < 1e-9 && n[0] < 0.5 - 1e-9 {
                *on_slit.entry((n[0] * 1e12).round() as i64).or_insert(0) += 1;
            }
        }
        assert!(!on_slit.is_empty());
        for (_, count) in on_slit {
            assert_eq!(count, 2, "each slit-face position must carry two nodes");
        }
        // The crack tip node is shared, not duplicated.
        let tips = m
            .nodes()
            .iter()
            .filter(|n| (n[0] - 0.5).abs() < 1e-9 && (n[1] - 0.5).abs() < 1e-9)
            .count();
        assert_eq!(tips, 1);
    }

    #[test]
    fn sent_area_is_unit() {
        let m = generate_sent_mesh(0.1).unwrap();
        assert_relative_eq!(m.total_area(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn generated_meshes_have_expected_areas() {
        let lp = generate_lpanel_mesh(25.0).unwrap();
        assert_relative_eq!(lp.total_area(), 500.0 * 500.0 - 250.0 * 250.0, max_relative = 1e-8);
        let tpb = generate_tpb_mesh(2.0).unwrap();
        assert_relative_eq!(tpb.total_area(), 450.0 * 100.0 - 5.0 * 50.0, max_relative = 1e-8);
        let sens = generate_sens_mesh(0.25).unwrap();
        assert_relative_eq!(sens.total_area(), 1.0, max_relative = 1e-8);
    }

    #[test]
    fn areas_hold_for_varied_h_and_uniform_meshes() {
        let uniform = MeshOptions { refine: false, ..Default::default() };
        for h in [0.05, 0.11, 0.2] {
            let m = generate_case_mesh(BenchmarkCase::Sent, h, &uniform).unwrap();
            assert_relative_eq!(m.total_area(), 1.0, max_relative = 1e-8);
        }
        for h in [10.0, 17.3] {
            let m = generate_case_mesh(BenchmarkCase::LPanel, h, &uniform).unwrap();
            assert_relative_eq!(m.total_area(), 187_500.0, max_relative = 1e-8);
        }
        for h in [3.0, 4.7] {
            let m = generate_case_mesh(BenchmarkCase::Tpb, h, &uniform).unwrap();
            assert_relative_eq!(m.total_area(), 44_750.0, max_relative = 1e-8);
        }
    }

    #[test]
    fn sens_side_sets_lie_on_edges() {
        let m = generate_sens_mesh(0.25).unwrap();
        let left = m.node_set("left").unwrap();
        let right = m.node_set("right").unwrap();
        assert!(!left.is_empty() && !right.is_empty());
        for &i in left {
            assert!(m.node(i)[0].abs() < 1e-9);
        }
        for &i in right {
            assert!((m.node(i)[0] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn lpanel_load_edge_spans_30mm() {
        let m = generate_lpanel_mesh(10.0).unwrap();
        let edge = m.node_set("load_edge").unwrap();
        assert!(edge.len() >= 2);
        let xs: Vec<f64> = edge.iter().map(|&i| m.node(i)[0]).collect();
        let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_relative_eq!(min, 470.0, epsilon = 1e-9);
        assert_relative_eq!(max, 500.0, epsilon = 1e-9);
        for &i in edge {
            assert_relative_eq!(m.node(i)[1], 250.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn tpb_sets_and_notch() {
        let m = generate_tpb_mesh(5.0).unwrap();
        assert_eq!(m.node_set("support_left").unwrap().len(), 1);
        assert_eq!(m.node_set("support_right").unwrap().len(), 1);
        assert!(!m.node_set("load_point").unwrap().is_empty());
        // No node strictly inside the notch cutout.
        for n in m.nodes() {
            let inside = n[0] > 222.5 + 1e-9 && n[0] < 227.5 - 1e-9 && n[1] < 50.0 - 1e-9;
            assert!(!inside, "node ({}, {}) inside the notch", n[0], n[1]);
        }
    }

    #[test]
    fn too_coarse_h_is_rejected() {
        assert!(generate_sent_mesh(0.5).is_err());
        assert!(generate_lpanel_mesh(31.0).is_err());
        assert!(generate_tpb_mesh(5.5).is_err());
        assert!(generate_sent_mesh(-0.1).is_err());
    }

    #[test]
    fn mesh_text_round_trip() {
        let m = generate_tpb_mesh(5.0).unwrap();
        let text = m.to_text();
        let back = Mesh::from_text(&text).unwrap();
        assert_eq!(m.num_nodes(), back.num_nodes());
        assert_eq!(m.num_elements(), back.num_elements());
        assert_eq!(m.nodes(), back.nodes());
        assert_eq!(m.elements(), back.elements());
        for name in m.node_set_names() {
            assert_eq!(m.node_set(name).unwrap(), back.node_set(name).unwrap());
        }
    }

    #[test]
    fn bad_mesh_text_is_rejected() {
        assert!(Mesh::from_text("garbage").is_err());
        assert!(Mesh::from_text("microfrac-mesh v1\nnodes 1\n0 0\nelements 1\n0 0 0\n").is_err());
    }
}
