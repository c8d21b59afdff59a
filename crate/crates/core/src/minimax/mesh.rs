//! Triangulated half-disk `{y ≥ 0, x² + y² ≤ R²}` (or quarter-disk) in
//! parameter space, with one field image per vertex.
//!
//! Vertices sit on concentric rings; ring `i` of `N = 2^level` carries
//! `s·i + 1` equally spaced angles (`s = 2` on the half-disk, `1` on the
//! quarter-disk). Parameters are stored in polar form so arc vertices have
//! radius exactly `R`. Local refinement splits triangles 1→4 and closes
//! the mesh conformingly with 1→2 splits.

use std::collections::{HashMap, HashSet};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::cones::{project, Sign};
use crate::error::{Error, Result};
use crate::grid::Field;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SurfaceVariant {
    /// Half-disk in span{e₁, e₂}, whole boundary pinned.
    GammaS,
    /// Half-disk, arc pinned; the `e₁` half-diameter is kept in `P⁺` and
    /// the other half in `P⁻`.
    GammaSPrime,
    /// Quarter-disk in span{α₁, α₂} with disjointly supported bumps; arc
    /// pinned, legs kept in `P⁺` and `P⁻`.
    GammaSDoublePrime,
}

impl SurfaceVariant {
    pub const ALL: [SurfaceVariant; 3] = [
        SurfaceVariant::GammaS,
        SurfaceVariant::GammaSPrime,
        SurfaceVariant::GammaSDoublePrime,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SurfaceVariant::GammaS => "gamma_s",
            SurfaceVariant::GammaSPrime => "gamma_s_prime",
            SurfaceVariant::GammaSDoublePrime => "gamma_s_doubleprime",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.as_str() == s)
    }

    /// Angular extent of the parameter domain.
    pub fn span(self) -> f64 {
        match self {
            SurfaceVariant::GammaSDoublePrime => FRAC_PI_2,
            _ => PI,
        }
    }

    fn points_per_ring(self) -> usize {
        match self {
            SurfaceVariant::GammaSDoublePrime => 1,
            _ => 2,
        }
    }

    /// Whether vertices with this tag never move.
    pub fn pins(self, tag: VertexTag) -> bool {
        match tag {
            VertexTag::Interior => false,
            VertexTag::Leg1 | VertexTag::Leg2 => self == SurfaceVariant::GammaS,
            VertexTag::Arc | VertexTag::Origin => true,
        }
    }

    /// Cone a moving leg vertex is projected onto.
    pub fn leg_sign(self, tag: VertexTag) -> Option<Sign> {
        if self == SurfaceVariant::GammaS {
            return None;
        }
        match tag {
            VertexTag::Leg1 => Some(Sign::Plus),
            VertexTag::Leg2 => Some(Sign::Minus),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexTag {
    Interior,
    /// `x² + y² = R²`.
    Arc,
    /// `θ = 0`, excluding the endpoints.
    Leg1,
    /// `θ = span`, excluding the endpoints.
    Leg2,
    Origin,
}

#[derive(Clone, Copy, Debug)]
struct Vertex {
    r: f64,
    theta: f64,
    tag: VertexTag,
}

#[derive(Clone, Copy, Debug)]
struct Triangle {
    v: [usize; 3],
    depth: u8,
}

pub const MIN_MESH_LEVEL: u32 = 3;
pub const MAX_MESH_LEVEL: u32 = 7;
/// Local refinement stops this many levels below the base mesh.
pub const MAX_REFINE_DEPTH: u8 = 2;

/// Mesh plus vertex images `g(x, y)`.
#[derive(Clone, Debug)]
pub struct Surface {
    variant: SurfaceVariant,
    radius: f64,
    basis: (Field, Field),
    level: u32,
    vertices: Vec<Vertex>,
    images: Vec<Field>,
    triangles: Vec<Triangle>,
}

impl Surface {
    /// Mesh of `2^level` rings with images `x·a + y·b`.
    pub fn new(
        variant: SurfaceVariant,
        radius: f64,
        a: &Field,
        b: &Field,
        level: u32,
    ) -> Result<Self> {
        if !(MIN_MESH_LEVEL..=MAX_MESH_LEVEL).contains(&level) {
            return Err(Error::invalid(
                "mesh_level",
                format!("must be in [{MIN_MESH_LEVEL}, {MAX_MESH_LEVEL}]"),
            ));
        }
        if !(radius > 0.0) {
            return Err(Error::invalid("radius", "must be > 0"));
        }
        a.grid().ensure_same(&b.grid())?;
        let rings = 1usize << level;
        let s = variant.points_per_ring();
        let span = variant.span();
        let mut vertices = Vec::new();
        let mut ring_start = Vec::with_capacity(rings + 1);
        for i in 0..=rings {
            ring_start.push(vertices.len());
            if i == 0 {
                vertices.push(Vertex {
                    r: 0.0,
                    theta: 0.0,
                    tag: VertexTag::Origin,
                });
                continue;
            }
            let r = if i == rings {
                radius
            } else {
                radius * i as f64 / rings as f64
            };
            let count = s * i;
            for j in 0..=count {
                let theta = span * j as f64 / count as f64;
                let tag = if i == rings {
                    VertexTag::Arc
                } else if j == 0 {
                    VertexTag::Leg1
                } else if j == count {
                    VertexTag::Leg2
                } else {
                    VertexTag::Interior
                };
                vertices.push(Vertex { r, theta, tag });
            }
        }
        let mut triangles = Vec::new();
        for i in 1..=rings {
            let (p0, q0) = (ring_start[i - 1], ring_start[i]);
            let a_len = if i == 1 { 1 } else { s * (i - 1) + 1 };
            let b_len = s * i + 1;
            let angle = |start: usize, k: usize| vertices[start + k].theta;
            let (mut p, mut q) = (0, 0);
            while p < a_len - 1 || q < b_len - 1 {
                let advance_outer =
                    q < b_len - 1 && (p == a_len - 1 || angle(q0, q + 1) <= angle(p0, p + 1));
                if advance_outer {
                    triangles.push(Triangle {
                        v: [p0 + p, q0 + q, q0 + q + 1],
                        depth: 0,
                    });
                    q += 1;
                } else {
                    triangles.push(Triangle {
                        v: [p0 + p, q0 + q, p0 + p + 1],
                        depth: 0,
                    });
                    p += 1;
                }
            }
        }
        let mut surface = Surface {
            variant,
            radius,
            basis: (a.clone(), b.clone()),
            level,
            vertices,
            images: Vec::new(),
            triangles,
        };
        surface.images = (0..surface.vertices.len())
            .map(|i| surface.embedding(i))
            .collect();
        Ok(surface)
    }

    pub fn variant(&self) -> SurfaceVariant {
        self.variant
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn tag(&self, i: usize) -> VertexTag {
        self.vertices[i].tag
    }

    /// Cartesian parameters `(x, y)`.
    pub fn param(&self, i: usize) -> (f64, f64) {
        let v = self.vertices[i];
        (v.r * v.theta.cos(), v.r * v.theta.sin())
    }

    /// Polar parameters `(r, θ)`.
    pub fn polar(&self, i: usize) -> (f64, f64) {
        (self.vertices[i].r, self.vertices[i].theta)
    }

    /// The initial linear image `x·a + y·b` of vertex `i`.
    pub fn embedding(&self, i: usize) -> Field {
        let v = self.vertices[i];
        if v.tag == VertexTag::Origin {
            return Field::zeros(self.basis.0.grid());
        }
        let (x, y) = self.param(i);
        Field::combine(x, &self.basis.0, y, &self.basis.1)
    }

    pub fn images(&self) -> &[Field] {
        &self.images
    }

    pub fn image(&self, i: usize) -> &Field {
        &self.images[i]
    }

    pub(crate) fn set_image(&mut self, i: usize, u: Field) {
        self.images[i] = u;
    }

    /// Scales every image by `s` (pinned ones included).
    pub fn scale_images(&mut self, s: f64) {
        for u in &mut self.images {
            *u = u.scaled(s);
        }
    }

    pub fn triangles(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.triangles.iter().map(|t| t.v)
    }

    /// Undirected edges `(lo, hi)` in ascending order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| {
                let [a, b, c] = t.v;
                [(a, b), (b, c), (c, a)]
            })
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Mesh neighbors of vertex `i`, ascending.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .triangles
            .iter()
            .filter(|t| t.v.contains(&i))
            .flat_map(|t| t.v)
            .filter(|&j| j != i)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Every pinned image equals its embedding and every projected leg
    /// image lies in its cone.
    pub fn boundary_admissible(&self) -> bool {
        (0..self.len()).all(|i| {
            let tag = self.tag(i);
            if self.variant.pins(tag) {
                self.images[i] == self.embedding(i)
            } else if let Some(sign) = self.variant.leg_sign(tag) {
                project(&self.images[i], sign) == self.images[i]
            } else {
                true
            }
        })
    }

    fn midpoint_vertex(&self, a: usize, b: usize) -> Vertex {
        let (va, vb) = (self.vertices[a], self.vertices[b]);
        let span = self.variant.span();
        let on_ray = |v: Vertex, theta: f64| v.r == 0.0 || v.theta == theta;
        if va.r == self.radius && vb.r == self.radius {
            return Vertex {
                r: self.radius,
                theta: 0.5 * (va.theta + vb.theta),
                tag: VertexTag::Arc,
            };
        }
        for (theta, tag) in [(0.0, VertexTag::Leg1), (span, VertexTag::Leg2)] {
            if on_ray(va, theta) && on_ray(vb, theta) {
                return Vertex {
                    r: 0.5 * (va.r + vb.r),
                    theta,
                    tag,
                };
            }
        }
        let (xa, ya) = self.param(a);
        let (xb, yb) = self.param(b);
        let (x, y) = (0.5 * (xa + xb), 0.5 * (ya + yb));
        Vertex {
            r: x.hypot(y),
            theta: y.atan2(x),
            tag: VertexTag::Interior,
        }
    }

    fn add_midpoint(&mut self, a: usize, b: usize) -> usize {
        let vertex = self.midpoint_vertex(a, b);
        let idx = self.vertices.len();
        self.vertices.push(vertex);
        let image = if self.variant.pins(vertex.tag) {
            self.embedding(idx)
        } else {
            let avg = Field::combine(0.5, &self.images[a], 0.5, &self.images[b]);
            match self.variant.leg_sign(vertex.tag) {
                Some(sign) => project(&avg, sign),
                None => avg,
            }
        };
        self.images.push(image);
        idx
    }

    /// Splits the triangles around vertex `i` that are still above the depth
    /// cap, then closes the mesh. Returns the new vertex indices (empty if
    /// nothing was refinable).
    pub fn refine_around(&mut self, i: usize) -> Vec<usize> {
        let mut red: Vec<bool> = self
            .triangles
            .iter()
            .map(|t| t.v.contains(&i) && t.depth < MAX_REFINE_DEPTH)
            .collect();
        if !red.iter().any(|&r| r) {
            return Vec::new();
        }
        let key = |a: usize, b: usize| (a.min(b), a.max(b));
        let tri_edges = |t: &Triangle| {
            let [a, b, c] = t.v;
            [key(a, b), key(b, c), key(c, a)]
        };
        let mut split: HashSet<(usize, usize)>;
        loop {
            split = self
                .triangles
                .iter()
                .zip(&red)
                .filter(|(_, &r)| r)
                .flat_map(|(t, _)| tri_edges(t))
                .collect();
            let mut changed = false;
            for (t, r) in self.triangles.iter().zip(red.iter_mut()) {
                if !*r && tri_edges(t).iter().filter(|e| split.contains(e)).count() >= 2 {
                    *r = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let first_new = self.vertices.len();
        let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
        let old = std::mem::take(&mut self.triangles);
        let mut fresh = Vec::with_capacity(old.len() + 8);
        for (t, &r) in old.iter().zip(&red) {
            let [a, b, c] = t.v;
            let depth = t.depth + 1;
            let mut mid = |this: &mut Self, x: usize, y: usize| -> usize {
                *mids
                    .entry(key(x, y))
                    .or_insert_with(|| this.add_midpoint(x, y))
            };
            if r {
                let (ab, bc, ca) = (mid(self, a, b), mid(self, b, c), mid(self, c, a));
                for v in [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]] {
                    fresh.push(Triangle { v, depth });
                }
                continue;
            }
            let hit = [(a, b, c), (b, c, a), (c, a, b)]
                .into_iter()
                .find(|&(x, y, _)| split.contains(&key(x, y)));
            match hit {
                Some((x, y, z)) => {
                    let m = mid(self, x, y);
                    fresh.push(Triangle {
                        v: [x, m, z],
                        depth,
                    });
                    fresh.push(Triangle {
                        v: [m, y, z],
                        depth,
                    });
                }
                None => fresh.push(*t),
            }
        }
        self.triangles = fresh;
        (first_new..self.vertices.len()).collect()
    }
}
