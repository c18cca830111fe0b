//! Exact area of a union of disks clipped to a rectangle.
//!
//! The boundary of (union ∩ rectangle) is made of circle arcs lying outside
//! every other disk and inside the rectangle, plus rectangle edge pieces
//! lying inside some disk. Its area follows from Green's theorem,
//! A = 1/2 ∮ (x dy - y dx), summed over those pieces.
#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

impl Circle {
    pub fn new(x: f64, y: f64, r: f64) -> Self {
        Circle { x, y, r }
    }

    fn at(&self, t: f64) -> (f64, f64) {
        (self.x + self.r * t.cos(), self.y + self.r * t.sin())
    }
}

fn norm(a: f64) -> f64 {
    a.rem_euclid(TAU)
}

fn circle_breaks(c: &Circle, others: &[Circle], w: f64, h: f64) -> Vec<f64> {
    let mut t = vec![0.0, TAU];
    for o in others {
        let (dx, dy) = (o.x - c.x, o.y - c.y);
        let d = dx.hypot(dy);
        if d > 0.0 && d < c.r + o.r && d > (c.r - o.r).abs() {
            let base = dy.atan2(dx);
            let phi = ((d * d + c.r * c.r - o.r * o.r) / (2.0 * d * c.r)).clamp(-1.0, 1.0).acos();
            t.push(norm(base + phi));
            t.push(norm(base - phi));
        }
    }
    for x in [0.0, w] {
        let dx = x - c.x;
        if dx.abs() < c.r {
            let dy = (c.r * c.r - dx * dx).sqrt();
            t.push(norm(dy.atan2(dx)));
            t.push(norm((-dy).atan2(dx)));
        }
    }
    for y in [0.0, h] {
        let dy = y - c.y;
        if dy.abs() < c.r {
            let dx = (c.r * c.r - dy * dy).sqrt();
            t.push(norm(dy.atan2(dx)));
            t.push(norm(dy.atan2(-dx)));
        }
    }
    t.sort_by(|a, b| a.total_cmp(b));
    t
}

/// Parameters in (0, 1) where the segment p→q crosses circle `c`.
fn segment_breaks(p: (f64, f64), q: (f64, f64), c: &Circle) -> Vec<f64> {
    let (dx, dy) = (q.0 - p.0, q.1 - p.1);
    let (fx, fy) = (p.0 - c.x, p.1 - c.y);
    let a = dx * dx + dy * dy;
    let b = 2.0 * (fx * dx + fy * dy);
    let k = fx * fx + fy * fy - c.r * c.r;
    let disc = b * b - 4.0 * a * k;
    if disc <= 0.0 {
        return Vec::new();
    }
    let s = disc.sqrt();
    [(-b - s) / (2.0 * a), (-b + s) / (2.0 * a)].into_iter().filter(|t| *t > 0.0 && *t < 1.0).collect()
}

pub fn union_area_in_rect(circles: &[Circle], w: f64, h: f64) -> f64 {
    // Identical disks contribute once.
    let mut cs: Vec<Circle> = Vec::new();
    for c in circles {
        if !cs.contains(c) {
            cs.push(*c);
        }
    }
    let inside_rect = |(x, y): (f64, f64)| (0.0..=w).contains(&x) && (0.0..=h).contains(&y);
    let mut twice_area = 0.0;
    for (i, c) in cs.iter().enumerate() {
        let others: Vec<Circle> = cs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, o)| *o).collect();
        let t = circle_breaks(c, &others, w, h);
        for win in t.windows(2) {
            let (a, b) = (win[0], win[1]);
            if b - a < 1e-15 {
                continue;
            }
            let m = c.at(0.5 * (a + b));
            let covered = others.iter().any(|o| (m.0 - o.x).hypot(m.1 - o.y) < o.r);
            if inside_rect(m) && !covered {
                twice_area += c.r * c.r * (b - a) + c.x * c.r * (b.sin() - a.sin()) - c.y * c.r * (b.cos() - a.cos());
            }
        }
    }
    let corners = [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)];
    for k in 0..4 {
        let (p, q) = (corners[k], corners[(k + 1) % 4]);
        let mut t = vec![0.0, 1.0];
        for c in &cs {
            t.extend(segment_breaks(p, q, c));
        }
        t.sort_by(|a, b| a.total_cmp(b));
        let lerp = |s: f64| (p.0 + s * (q.0 - p.0), p.1 + s * (q.1 - p.1));
        for win in t.windows(2) {
            let m = lerp(0.5 * (win[0] + win[1]));
            if cs.iter().any(|c| (m.0 - c.x).hypot(m.1 - c.y) <= c.r) {
                let (s, e) = (lerp(win[0]), lerp(win[1]));
                twice_area += s.0 * e.1 - e.0 * s.1;
            }
        }
    }
    0.5 * twice_area
}

/// Intersection area of two disks of any radii.
pub fn pair_intersection(a: &Circle, b: &Circle) -> f64 {
    let d = (a.x - b.x).hypot(a.y - b.y);
    let (r, s) = (a.r, b.r);
    if d >= r + s {
        return 0.0;
    }
    if d <= (r - s).abs() {
        return PI * r.min(s).powi(2);
    }
    let alpha = ((d * d + r * r - s * s) / (2.0 * d * r)).acos();
    let beta = ((d * d + s * s - r * r) / (2.0 * d * s)).acos();
    r * r * (alpha - alpha.sin() * alpha.cos()) + s * s * (beta - beta.sin() * beta.cos())
}
