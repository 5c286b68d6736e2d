//! Finite-depth expansion of attractors into pieces and point clouds, plus SVG/DOT/CSV output.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gifsbuild::{GifsSystem, Term};
use crate::nbrgraph::LabeledDigraph;
use crate::similitude::NumericMap;

/// `map(B_kind)` at a given depth; `kind` is 0-based.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub map: NumericMap,
    pub kind: usize,
    pub depth: usize,
}

/// The one-attractor system `B_1 = ∪ f_i(B_1)` of a plain IFS with `m` maps.
pub fn ifs_system(m: usize) -> GifsSystem {
    let eq: Vec<(usize, usize)> = (1..=m).map(|i| (i, 1)).collect();
    GifsSystem::from_pairs(m, &[&eq]).expect("well-formed")
}

/// All compositions of equation terms along paths of length `depth` starting from attractor `k`.
pub fn expand_pieces(system: &GifsSystem, maps: &[NumericMap], k: usize, depth: usize) -> Vec<Piece> {
    let mut level = vec![Piece {
        map: NumericMap::identity(),
        kind: k,
        depth: 0,
    }];
    for d in 1..=depth {
        level = level
            .par_iter()
            .flat_map_iter(|p| {
                system.equation(p.kind).iter().map(move |&Term { map, target }| Piece {
                    map: p.map.compose(&maps[map - 1]),
                    kind: target,
                    depth: d,
                })
            })
            .collect();
    }
    level
}

/// Tagged sample points; tags are 0-based attractor indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<(Complex64, usize)>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn coords(&self) -> Vec<Complex64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn diameter(&self) -> f64 {
        let pts = self.coords();
        pts.par_iter()
            .map(|a| pts.iter().map(|b| (a - b).norm()).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("re,im,type\n");
        for (z, t) in &self.points {
            let _ = writeln!(out, "{:e},{:e},{}", z.re, z.im, t + 1);
        }
        out
    }

    pub fn to_json(&self) -> String {
        let doc = CloudDoc {
            points: self.points.iter().map(|(z, t)| (z.re, z.im, t + 1)).collect(),
        };
        serde_json::to_string(&doc).expect("serializable")
    }
}

#[derive(Serialize, Deserialize)]
struct CloudDoc {
    /// `(re, im, type)` with 1-based types.
    points: Vec<(f64, f64, usize)>,
}

/// Fixed point of the first map, which lies in the attractor of the IFS.
pub fn default_seed(maps: &[NumericMap]) -> Complex64 {
    let f = maps[0];
    f.b / (Complex64::new(1.0, 0.0) - f.a)
}

/// Images of `seeds` under every depth-level piece, tagged by the piece type.
pub fn point_cloud(
    system: &GifsSystem,
    maps: &[NumericMap],
    k: usize,
    depth: usize,
    seeds: &[Complex64],
) -> PointCloud {
    let default = [default_seed(maps)];
    let seeds = if seeds.is_empty() { &default[..] } else { seeds };
    let points = expand_pieces(system, maps, k, depth)
        .into_iter()
        .flat_map(|p| seeds.iter().map(move |&z| (p.map.apply(z), p.kind)))
        .collect();
    PointCloud { points }
}

/// Symmetric Hausdorff distance between two finite clouds.
pub fn hausdorff_distance(p: &PointCloud, q: &PointCloud) -> f64 {
    let (a, b) = (p.coords(), q.coords());
    assert!(!a.is_empty() && !b.is_empty(), "clouds must be nonempty");
    directed(&a, &b).max(directed(&b, &a))
}

/// `max_{x∈a} min_{y∈b} |x − y|` via a uniform grid over `b`.
fn directed(a: &[Complex64], b: &[Complex64]) -> f64 {
    let grid = Grid::new(b);
    a.par_iter().map(|&x| grid.nearest(x)).reduce(|| 0.0, f64::max)
}

struct Grid<'a> {
    points: &'a [Complex64],
    origin: Complex64,
    cell: f64,
    nx: i64,
    ny: i64,
    /// Point indices per cell, row-major.
    cells: Vec<Vec<usize>>,
}

impl<'a> Grid<'a> {
    fn new(points: &'a [Complex64]) -> Self {
        let (mut lo, mut hi) = (points[0], points[0]);
        for z in points {
            lo = Complex64::new(lo.re.min(z.re), lo.im.min(z.im));
            hi = Complex64::new(hi.re.max(z.re), hi.im.max(z.im));
        }
        let span = (hi.re - lo.re).max(hi.im - lo.im);
        let per_side = (points.len() as f64).sqrt().ceil().max(1.0);
        let cell = if span > 0.0 { span / per_side } else { 1.0 };
        let nx = (((hi.re - lo.re) / cell).floor() as i64 + 1).max(1);
        let ny = (((hi.im - lo.im) / cell).floor() as i64 + 1).max(1);
        let mut cells = vec![Vec::new(); (nx * ny) as usize];
        let mut grid = Grid {
            points,
            origin: lo,
            cell,
            nx,
            ny,
            cells: Vec::new(),
        };
        for (idx, &z) in points.iter().enumerate() {
            let (cx, cy) = grid.cell_of(z);
            let (cx, cy) = (cx.clamp(0, nx - 1), cy.clamp(0, ny - 1));
            cells[(cy * nx + cx) as usize].push(idx);
        }
        grid.cells = cells;
        grid
    }

    fn cell_of(&self, z: Complex64) -> (i64, i64) {
        (
            ((z.re - self.origin.re) / self.cell).floor() as i64,
            ((z.im - self.origin.im) / self.cell).floor() as i64,
        )
    }

    /// Exact nearest distance: rings of cells are scanned until the ring radius exceeds the best
    /// distance found, so the minimum is taken over the same values as a full scan.
    fn nearest(&self, x: Complex64) -> f64 {
        let (cx, cy) = self.cell_of(x);
        let mut best = f64::INFINITY;
        // Rings closer than the grid box are empty.
        let start = [-cx, cx - (self.nx - 1), -cy, cy - (self.ny - 1), 0].into_iter().max().unwrap();
        let end = start + self.nx + self.ny;
        for r in start..=end {
            for (gx, gy) in ring(cx, cy, r) {
                if gx < 0 || gy < 0 || gx >= self.nx || gy >= self.ny {
                    continue;
                }
                for &i in &self.cells[(gy * self.nx + gx) as usize] {
                    let d = (x - self.points[i]).norm();
                    if d < best {
                        best = d;
                    }
                }
            }
            if best <= r as f64 * self.cell {
                break;
            }
        }
        best
    }
}

fn ring(cx: i64, cy: i64, r: i64) -> Vec<(i64, i64)> {
    if r == 0 {
        return vec![(cx, cy)];
    }
    let mut out = Vec::with_capacity(8 * r as usize);
    for dx in -r..=r {
        out.push((cx + dx, cy - r));
        out.push((cx + dx, cy + r));
    }
    for dy in (-r + 1)..r {
        out.push((cx - r, cy + dy));
        out.push((cx + r, cy + dy));
    }
    out
}

/// Convex hull, counter-clockwise, starting from the lowest-leftmost point.
pub fn convex_hull(points: &[Complex64]) -> Vec<Complex64> {
    let mut pts: Vec<Complex64> = points.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Complex64, a: Complex64, b: Complex64| (a - o).re * (b - o).im - (a - o).im * (b - o).re;
    let mut lower: Vec<Complex64> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Complex64> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Number of sample points per type used for the piece outlines.
pub const HULL_SAMPLE: usize = 32;

/// Per attractor type, the hull of a 32-point sample of that type's attractor.
pub fn type_hulls(system: &GifsSystem, maps: &[NumericMap], seed: Complex64) -> Vec<Vec<Complex64>> {
    (0..system.len())
        .map(|k| {
            let mut depth = 0;
            let mut cloud = point_cloud(system, maps, k, 0, &[seed]);
            while cloud.len() < HULL_SAMPLE && depth < 16 {
                depth += 1;
                let next = point_cloud(system, maps, k, depth, &[seed]);
                if next.is_empty() {
                    break;
                }
                cloud = next;
            }
            let pts = cloud.coords();
            let stride = (pts.len() / HULL_SAMPLE).max(1);
            let sample: Vec<Complex64> = pts.iter().step_by(stride).take(HULL_SAMPLE).copied().collect();
            convex_hull(&sample)
        })
        .collect()
}

/// Fixed 16-color cycle indexed by attractor type.
pub const PALETTE: [&str; 16] = [
    "#1f77b4", "#ffbf00", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#e6550d", "#31a354", "#756bb1", "#843c39", "#636363",
];

#[derive(Clone, Debug, PartialEq)]
pub struct SvgOptions {
    pub width: f64,
    pub margin: f64,
    pub palette: Vec<String>,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions {
            width: 800.0,
            margin: 10.0,
            palette: PALETTE.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl SvgOptions {
    fn color(&self, kind: usize) -> &str {
        &self.palette[kind % self.palette.len()]
    }
}

struct Frame {
    lo: Complex64,
    scale: f64,
    width: f64,
    height: f64,
    margin: f64,
    top: f64,
}

impl Frame {
    fn new(points: impl Iterator<Item = Complex64>, opts: &SvgOptions) -> Frame {
        let mut lo = Complex64::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for z in points {
            lo = Complex64::new(lo.re.min(z.re), lo.im.min(z.im));
            hi = Complex64::new(hi.re.max(z.re), hi.im.max(z.im));
        }
        if !lo.re.is_finite() {
            return Frame {
                lo: Complex64::new(0.0, 0.0),
                scale: 1.0,
                width: opts.width,
                height: opts.width,
                margin: opts.margin,
                top: 0.0,
            };
        }
        let span_x = (hi.re - lo.re).max(1e-12);
        let span_y = (hi.im - lo.im).max(1e-12);
        let inner = opts.width - 2.0 * opts.margin;
        let scale = inner / span_x.max(span_y);
        Frame {
            lo,
            scale,
            width: opts.width,
            height: span_y * scale + 2.0 * opts.margin,
            margin: opts.margin,
            top: hi.im,
        }
    }

    fn xy(&self, z: Complex64) -> (f64, f64) {
        (
            self.margin + (z.re - self.lo.re) * self.scale,
            self.margin + (self.top - z.im) * self.scale,
        )
    }

    fn header(&self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
            self.width, self.height, self.width, self.height
        )
    }
}

/// Pieces drawn as images of their type's hull, filled by type.
pub fn svg_from_pieces(pieces: &[Piece], hulls: &[Vec<Complex64>], opts: &SvgOptions) -> String {
    let polys: Vec<(usize, Vec<Complex64>)> = pieces
        .iter()
        .map(|p| (p.kind, hulls[p.kind].iter().map(|&z| p.map.apply(z)).collect()))
        .collect();
    let frame = Frame::new(polys.iter().flat_map(|(_, v)| v.iter().copied()), opts);
    let mut out = frame.header();
    for (kind, poly) in &polys {
        if poly.is_empty() {
            continue;
        }
        let pts: Vec<String> = poly
            .iter()
            .map(|&z| {
                let (x, y) = frame.xy(z);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            out,
            "<polygon points=\"{}\" fill=\"{}\" stroke=\"black\" stroke-width=\"0.3\"/>",
            pts.join(" "),
            opts.color(*kind)
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn svg_from_cloud(cloud: &PointCloud, opts: &SvgOptions) -> String {
    let frame = Frame::new(cloud.points.iter().map(|p| p.0), opts);
    let mut out = frame.header();
    for &(z, kind) in &cloud.points {
        let (x, y) = frame.xy(z);
        let _ = writeln!(out, "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"1\" fill=\"{}\"/>", opts.color(kind));
    }
    out.push_str("</svg>\n");
    out
}

pub fn emit_svg(path: &Path, svg: &str) -> io::Result<()> {
    std::fs::write(path, svg)
}

pub fn emit_dot(graph: &LabeledDigraph, title: &str, path: &Path) -> io::Result<()> {
    std::fs::write(path, graph.to_dot(title))
}
