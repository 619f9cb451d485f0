//! Bounding volume hierarchy over triangles for ray queries.

use nalgebra::{Point3, Vector3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub a: Point3<f64>,
    pub b: Point3<f64>,
    pub c: Point3<f64>,
    /// Index into the scene's surface table.
    pub surface: u32,
}

impl Triangle {
    pub fn normal(&self) -> Vector3<f64> {
        (self.b - self.a).cross(&(self.c - self.a)).normalize()
    }

    fn centroid(&self) -> Point3<f64> {
        Point3::from((self.a.coords + self.b.coords + self.c.coords) / 3.0)
    }

    /// Möller–Trumbore; returns the ray parameter of a hit in `(t_min, t_max)`.
    fn intersect(&self, o: &Point3<f64>, d: &Vector3<f64>, t_min: f64, t_max: f64) -> Option<f64> {
        let e1 = self.b - self.a;
        let e2 = self.c - self.a;
        let p = d.cross(&e2);
        let det = e1.dot(&p);
        if det.abs() < 1e-14 {
            return None;
        }
        let inv = 1.0 / det;
        let s = o - self.a;
        let u = s.dot(&p) * inv;
        if !(0.0..=1.0).contains(&u) {
            return None;
        }
        let q = s.cross(&e1);
        let v = d.dot(&q) * inv;
        if v < 0.0 || u + v > 1.0 {
            return None;
        }
        let t = e2.dot(&q) * inv;
        (t > t_min && t < t_max).then_some(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Aabb {
    lo: Point3<f64>,
    hi: Point3<f64>,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            lo: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            hi: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Point3<f64>) {
        self.lo = self.lo.inf(p);
        self.hi = self.hi.sup(p);
    }

    fn hit(&self, o: &Point3<f64>, inv_d: &Vector3<f64>, t_max: f64) -> bool {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for k in 0..3 {
            let a = (self.lo[k] - o[k]) * inv_d[k];
            let b = (self.hi[k] - o[k]) * inv_d[k];
            let (near, far) = if a <= b { (a, b) } else { (b, a) };
            // NaN (0 · ∞) leaves the interval unchanged
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
            if t0 > t1 * (1.0 + 4.0 * f64::EPSILON) {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: `count > 0`, triangles `first..first+count`; interior: children
    /// at `first` and `first + 1`.
    first: usize,
    count: usize,
}

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub triangle: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Bvh {
    triangles: Vec<Triangle>,
    nodes: Vec<Node>,
}

impl Bvh {
    pub fn build(mut triangles: Vec<Triangle>) -> Self {
        if triangles.is_empty() {
            return Self::default();
        }
        let mut nodes = vec![Node {
            bounds: Aabb::empty(),
            first: 0,
            count: triangles.len(),
        }];
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let (first, count) = (nodes[ni].first, nodes[ni].count);
            let tris = &mut triangles[first..first + count];
            let mut bounds = Aabb::empty();
            let mut cb = Aabb::empty();
            for t in tris.iter() {
                for p in [&t.a, &t.b, &t.c] {
                    bounds.grow(p);
                }
                cb.grow(&t.centroid());
            }
            nodes[ni].bounds = bounds;
            if count <= LEAF_SIZE {
                continue;
            }
            let extent = cb.hi - cb.lo;
            let axis = if extent.x >= extent.y && extent.x >= extent.z {
                0
            } else if extent.y >= extent.z {
                1
            } else {
                2
            };
            let mid = count / 2;
            tris.select_nth_unstable_by(mid, |p, q| p.centroid()[axis].total_cmp(&q.centroid()[axis]));
            let left = nodes.len();
            nodes.push(Node {
                bounds: Aabb::empty(),
                first,
                count: mid,
            });
            nodes.push(Node {
                bounds: Aabb::empty(),
                first: first + mid,
                count: count - mid,
            });
            nodes[ni].first = left;
            nodes[ni].count = 0;
            stack.push(left);
            stack.push(left + 1);
        }
        Self { triangles, nodes }
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Closest hit with `t` in `(t_min, t_max)`.
    pub fn intersect(&self, o: &Point3<f64>, d: &Vector3<f64>, t_min: f64, t_max: f64) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv_d = d.map(|c| 1.0 / c);
        let mut best: Option<Hit> = None;
        let mut limit = t_max;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if !node.bounds.hit(o, &inv_d, limit) {
                continue;
            }
            if node.count > 0 {
                for (k, tri) in self.triangles[node.first..node.first + node.count].iter().enumerate() {
                    if let Some(t) = tri.intersect(o, d, t_min, limit) {
                        limit = t;
                        best = Some(Hit {
                            t,
                            triangle: node.first + k,
                        });
                    }
                }
            } else {
                stack.push(node.first);
                stack.push(node.first + 1);
            }
        }
        best
    }

    pub fn occluded(&self, o: &Point3<f64>, d: &Vector3<f64>, t_min: f64, t_max: f64) -> bool {
        self.intersect(o, d, t_min, t_max).is_some()
    }
}
