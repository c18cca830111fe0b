//! Planar geometry for deployment problems.
//!
//! Everything lives inside a [`RegionOfInterest`], an axis-aligned rectangle
//! anchored at the origin. Coverage is measured on a raster of cell centers,
//! Voronoi cells are built by clipping the rectangle against perpendicular
//! bisectors.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seeds closer than this are considered coincident.
pub const DUPLICATE_TOLERANCE: f64 = 1e-9;

/// Pitch of the position grid used for generated node positions.
///
/// Matches the wire codec's fixed-point unit, so a chromosome built from
/// generated positions encodes and decodes without loss.
pub const POSITION_STEP: f64 = 0.01;
pub(crate) const POSITION_UNITS_PER_METER: f64 = 100.0;

const DEFAULT_RASTER_STEP: f64 = 0.25;
const COLLINEAR_TOLERANCE: f64 = 1e-9;
const MIN_POLYGON_AREA: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid region of interest: {0}")]
    InvalidRegion(String),
    #[error("no seeds given")]
    NoSeeds,
    #[error("seeds {first} and {second} coincide")]
    DuplicateSeeds { first: usize, second: usize },
    #[error("seed {index} is not strictly inside the region")]
    SeedOutOfBounds { index: usize },
    #[error("polygon is degenerate (area {area:e})")]
    DegeneratePolygon { area: f64 },
    #[error("disk radii differ ({a} vs {b})")]
    MixedRadii { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist2(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(self, other: Point) -> f64 {
        self.dist2(other).sqrt()
    }

    /// Rounds both coordinates to the nearest multiple of [`POSITION_STEP`].
    pub fn snapped(self) -> Point {
        let snap = |v: f64| (v * POSITION_UNITS_PER_METER).round() / POSITION_UNITS_PER_METER;
        Point::new(snap(self.x), snap(self.y))
    }
}

/// Axis-aligned rectangle `[0, width] x [0, height]` with a raster resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionOfInterest {
    width: f64,
    height: f64,
    raster_step: f64,
}

impl RegionOfInterest {
    pub fn new(width: f64, height: f64) -> Result<Self, GeometryError> {
        Self::with_raster_step(width, height, DEFAULT_RASTER_STEP)
    }

    pub fn with_raster_step(width: f64, height: f64, raster_step: f64) -> Result<Self, GeometryError> {
        for (name, v) in [("width", width), ("height", height), ("raster_step", raster_step)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(GeometryError::InvalidRegion(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(RegionOfInterest { width, height, raster_step })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn raster_step(&self) -> f64 {
        self.raster_step
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Raster dimensions `(columns, rows)`.
    pub fn grid_dims(&self) -> (usize, usize) {
        ((self.width / self.raster_step).ceil() as usize, (self.height / self.raster_step).ceil() as usize)
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn contains_strictly(&self, p: Point) -> bool {
        p.x > 0.0 && p.x < self.width && p.y > 0.0 && p.y < self.height
    }

    /// Uniform point strictly inside the rectangle, at full precision.
    pub fn sample_interior<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        loop {
            let p = Point::new(rng.gen::<f64>() * self.width, rng.gen::<f64>() * self.height);
            if self.contains_strictly(p) {
                return p;
            }
        }
    }

    /// Uniform point on the position grid, inside the closed rectangle.
    pub fn sample_position<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        self.clamp(Point::new(rng.gen::<f64>() * self.width, rng.gen::<f64>() * self.height).snapped())
    }

    fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(0.0, self.width), p.y.clamp(0.0, self.height))
    }

    fn corners(&self) -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(self.width, 0.0),
            Point::new(self.width, self.height),
            Point::new(0.0, self.height),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Point,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Point, radius: f64) -> Self {
        debug_assert!(radius > 0.0);
        Disk { center, radius }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.center.dist2(p) <= self.radius * self.radius
    }
}

/// Convex polygon owned by one seed, vertices counterclockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiCell {
    pub seed: Point,
    pub vertices: Vec<Point>,
}

impl VoronoiCell {
    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    /// Point-in-convex-polygon test, boundary inclusive up to `eps`.
    pub fn contains(&self, p: Point, eps: f64) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            cross(a, b, p) >= -eps * a.dist(b).max(1.0)
        })
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Signed shoelace area; positive for counterclockwise polygons.
pub fn polygon_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n)
        .map(|i| {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            a.x * b.y - b.x * a.y
        })
        .sum();
    twice / 2.0
}

/// Voronoi tessellation of `roi` by `seeds`.
///
/// Each cell is the rectangle intersected with the bisector half-planes of
/// every other seed, so the cost is quadratic in the seed count.
pub fn voronoi(seeds: &[Point], roi: &RegionOfInterest) -> Result<Vec<VoronoiCell>, GeometryError> {
    if seeds.is_empty() {
        return Err(GeometryError::NoSeeds);
    }
    for (i, &s) in seeds.iter().enumerate() {
        if !roi.contains_strictly(s) {
            return Err(GeometryError::SeedOutOfBounds { index: i });
        }
    }
    for i in 0..seeds.len() {
        for j in i + 1..seeds.len() {
            if seeds[i].dist(seeds[j]) <= DUPLICATE_TOLERANCE {
                return Err(GeometryError::DuplicateSeeds { first: i, second: j });
            }
        }
    }

    let cells = seeds
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut poly = roi.corners();
            for (j, &q) in seeds.iter().enumerate() {
                if i == j || poly.is_empty() {
                    continue;
                }
                // {x : |x - p| <= |x - q|}  <=>  x . (q - p) <= (|q|^2 - |p|^2) / 2
                let a = Point::new(q.x - p.x, q.y - p.y);
                let b = (q.x * q.x + q.y * q.y - p.x * p.x - p.y * p.y) / 2.0;
                poly = clip_half_plane(&poly, a, b);
            }
            VoronoiCell { seed: p, vertices: simplify(poly) }
        })
        .collect();
    Ok(cells)
}

/// Sutherland-Hodgman step keeping `{x : a . x <= b}`.
fn clip_half_plane(poly: &[Point], a: Point, b: f64) -> Vec<Point> {
    let side = |p: Point| a.x * p.x + a.y * p.y - b;
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let cur = poly[i];
        let next = poly[(i + 1) % n];
        let (sc, sn) = (side(cur), side(next));
        if sc <= 0.0 {
            out.push(cur);
        }
        if (sc < 0.0 && sn > 0.0) || (sc > 0.0 && sn < 0.0) {
            let t = sc / (sc - sn);
            out.push(Point::new(cur.x + t * (next.x - cur.x), cur.y + t * (next.y - cur.y)));
        }
    }
    out
}

/// Drops repeated and collinear vertices.
fn simplify(poly: Vec<Point>) -> Vec<Point> {
    let mut pts: Vec<Point> = Vec::with_capacity(poly.len());
    for p in poly {
        if pts.last().is_none_or(|&l: &Point| l.dist(p) > COLLINEAR_TOLERANCE) {
            pts.push(p);
        }
    }
    while pts.len() > 1 && pts[0].dist(pts[pts.len() - 1]) <= COLLINEAR_TOLERANCE {
        pts.pop();
    }
    let mut changed = true;
    while changed && pts.len() >= 3 {
        changed = false;
        let n = pts.len();
        for i in 0..n {
            let prev = pts[(i + n - 1) % n];
            let next = pts[(i + 1) % n];
            let scale = prev.dist(next).max(1.0);
            if cross(prev, pts[i], next).abs() <= COLLINEAR_TOLERANCE * scale {
                pts.remove(i);
                changed = true;
                break;
            }
        }
    }
    pts
}

/// Area-weighted centroid of a cell.
pub fn cell_centroid(cell: &VoronoiCell) -> Result<Point, GeometryError> {
    polygon_centroid(&cell.vertices)
}

pub fn polygon_centroid(vertices: &[Point]) -> Result<Point, GeometryError> {
    let area = polygon_area(vertices);
    if vertices.len() < 3 || area.abs() < MIN_POLYGON_AREA {
        return Err(GeometryError::DegeneratePolygon { area });
    }
    // Shift to the first vertex to limit cancellation.
    let o = vertices[0];
    let n = vertices.len();
    let (mut cx, mut cy, mut twice) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let a = Point::new(vertices[i].x - o.x, vertices[i].y - o.y);
        let b = Point::new(vertices[(i + 1) % n].x - o.x, vertices[(i + 1) % n].y - o.y);
        let w = a.x * b.y - b.x * a.y;
        twice += w;
        cx += (a.x + b.x) * w;
        cy += (a.y + b.y) * w;
    }
    Ok(Point::new(o.x + cx / (3.0 * twice), o.y + cy / (3.0 * twice)))
}

/// Fraction of raster cell centers covered by at least one disk.
///
/// Cell `(i, j)` has its center at `((i + 0.5) * step, (j + 0.5) * step)`.
/// Each disk marks one column span per raster row it crosses in a bitmap.
pub fn coverage_fraction(disks: &[Disk], roi: &RegionOfInterest) -> f64 {
    let (cols, rows) = roi.grid_dims();
    if disks.is_empty() || cols == 0 || rows == 0 {
        return 0.0;
    }
    covered_cells(disks, roi) as f64 / (cols as f64 * rows as f64)
}

/// Number of raster cell centers covered by at least one disk.
pub fn covered_cells(disks: &[Disk], roi: &RegionOfInterest) -> u64 {
    let step = roi.raster_step;
    let (cols, rows) = roi.grid_dims();
    if cols == 0 || rows == 0 {
        return 0;
    }
    let words = cols.div_ceil(64);
    let mut bits = vec![0u64; words * rows];
    let last_col = cols as i64 - 1;
    for d in disks {
        let r2 = d.radius * d.radius;
        let j_lo = (((d.center.y - d.radius) / step - 0.5) as i64 - 1).max(0);
        let j_hi = (((d.center.y + d.radius) / step - 0.5) as i64 + 1).min(rows as i64 - 1);
        for j in j_lo..=j_hi {
            let dy = (j as f64 + 0.5) * step - d.center.y;
            let rest = r2 - dy * dy;
            if rest < 0.0 {
                continue;
            }
            let inside = |i: i64| {
                let dx = (i as f64 + 0.5) * step - d.center.x;
                dx * dx + dy * dy <= r2
            };
            let half = rest.sqrt();
            // Truncating casts only approximate the span ends (and avoid
            // slow floor/ceil calls); the exact membership test settles them.
            let mut lo = ((d.center.x - half) / step - 0.5) as i64;
            let mut hi = ((d.center.x + half) / step - 0.5) as i64;
            while inside(lo - 1) {
                lo -= 1;
            }
            while lo <= hi && !inside(lo) {
                lo += 1;
            }
            while inside(hi + 1) {
                hi += 1;
            }
            while hi >= lo && !inside(hi) {
                hi -= 1;
            }
            let (lo, hi) = (lo.max(0) as usize, hi.min(last_col));
            if hi < 0 || lo as i64 > hi {
                continue;
            }
            set_span(&mut bits[j as usize * words..(j as usize + 1) * words], lo, hi as usize);
        }
    }
    bits.iter().map(|w| w.count_ones() as u64).sum()
}

/// Sets bits `lo..=hi` of a row bitmap.
fn set_span(row: &mut [u64], lo: usize, hi: usize) {
    let (wl, wh) = (lo / 64, hi / 64);
    let head = !0u64 << (lo % 64);
    let tail = !0u64 >> (63 - hi % 64);
    if wl == wh {
        row[wl] |= head & tail;
    } else {
        row[wl] |= head;
        for w in &mut row[wl + 1..wh] {
            *w = !0;
        }
        row[wh] |= tail;
    }
}

/// Overlap measure between two equal disks: `max(0, 2r - d)`.
pub fn pair_overlap(a: &Disk, b: &Disk) -> Result<f64, GeometryError> {
    if a.radius != b.radius {
        return Err(GeometryError::MixedRadii { a: a.radius, b: b.radius });
    }
    Ok((2.0 * a.radius - a.center.dist(b.center)).max(0.0))
}

/// Intersection area of two disks of equal radius `r` whose centers are `d` apart.
pub fn lens_area(r: f64, d: f64) -> f64 {
    if d >= 2.0 * r {
        return 0.0;
    }
    2.0 * r * r * (d / (2.0 * r)).acos() - (d / 2.0) * (4.0 * r * r - d * d).sqrt()
}
