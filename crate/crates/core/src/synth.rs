//! Deterministic synthetic labeled scenes built from planes, boxes and
//! cylinders.
//!
//! Scene files use `[section]` blocks with `key = value` lines:
//!
//! ```text
//! [scene]
//! num_classes = 3        # optional, defaults to max class + 1
//! density_scale = 1.0    # optional multiplier on every density
//!
//! [plane]                # parallelogram origin + s*u + t*v, s,t in [0,1)
//! class = 0
//! origin = 0, 0, 0
//! u = 4, 0, 0
//! v = 0, 3, 0
//! density = 2000         # points per square meter
//! color = 0.6, 0.6, 0.6
//! color_noise = 0.03     # optional uniform jitter per channel
//! noise = 0.005          # Gaussian position noise (meters)
//! intensity = 0.4        # optional
//!
//! [box]                  # axis-aligned box surface
//! class = 2
//! min = 1, 1, 0
//! max = 1.5, 1.6, 0.5
//! open_bottom = true     # optional, skips the z = min face
//! density = 2000
//!
//! [cylinder]             # lateral surface around base + t*axis
//! class = 2
//! base = 3, 1, 0
//! axis = 0, 0, 1.2
//! radius = 0.2
//! density = 2000
//! ```
//!
//! Surfaces are sampled by jittered stratification: a grid with at least
//! `round(density * area)` cells, a seeded subset of exactly that many
//! cells, one jittered point per kept cell.

use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::kv::{self, Section};
use crate::numeric::split_seed;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Plane {
        origin: [f64; 3],
        u: [f64; 3],
        v: [f64; 3],
    },
    Box {
        min: [f64; 3],
        max: [f64; 3],
        open_bottom: bool,
    },
    Cylinder {
        base: [f64; 3],
        axis: [f64; 3],
        radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub class: u32,
    pub density: f64,
    pub color: [f64; 3],
    pub color_noise: f64,
    pub noise: f64,
    pub intensity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub primitives: Vec<Primitive>,
    pub num_classes: Option<u32>,
    pub density_scale: f64,
}

impl SceneSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = SceneSpec {
            primitives: Vec::new(),
            num_classes: None,
            density_scale: 1.0,
        };
        for section in kv::parse(text)? {
            match section.name.as_str() {
                "scene" => {
                    for e in &section.entries {
                        match e.key.as_str() {
                            "num_classes" => spec.num_classes = Some(e.usize()? as u32),
                            "density_scale" => spec.density_scale = e.f64()?,
                            _ => return Err(unknown_key(e)),
                        }
                    }
                }
                "plane" | "box" | "cylinder" => spec.primitives.push(parse_primitive(&section)?),
                other => {
                    return Err(Error::Parse {
                        line: section.line,
                        message: format!("unknown section '{other}'"),
                    })
                }
            }
        }
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Expected point count, before any generation.
    pub fn expected_points(&self) -> usize {
        self.primitives
            .iter()
            .flat_map(|p| surfaces(&p.shape).into_iter().map(move |s| (p, s)))
            .map(|(p, s)| (p.density * self.density_scale * s.area()).round() as usize)
            .sum()
    }
}

fn unknown_key(e: &kv::Entry) -> Error {
    Error::Parse {
        line: e.line,
        message: format!("unknown key '{}'", e.key),
    }
}

fn parse_primitive(section: &Section) -> Result<Primitive> {
    let mut class = None;
    let mut density = None;
    let mut color = [0.5, 0.5, 0.5];
    let mut color_noise = 0.0;
    let mut noise = 0.0;
    let mut intensity = None;
    let (mut a, mut b, mut c) = (None, None, None);
    let mut radius = None;
    let mut open_bottom = false;
    for e in &section.entries {
        match (section.name.as_str(), e.key.as_str()) {
            (_, "class") => class = Some(e.usize()? as u32),
            (_, "density") => density = Some(e.f64()?),
            (_, "color") => color = e.vec3()?,
            (_, "color_noise") => color_noise = e.f64()?,
            (_, "noise") => noise = e.f64()?,
            (_, "intensity") => intensity = Some(e.f64()?),
            ("plane", "origin") | ("box", "min") | ("cylinder", "base") => a = Some(e.vec3()?),
            ("plane", "u") | ("box", "max") | ("cylinder", "axis") => b = Some(e.vec3()?),
            ("plane", "v") => c = Some(e.vec3()?),
            ("cylinder", "radius") => radius = Some(e.f64()?),
            ("box", "open_bottom") => open_bottom = e.bool()?,
            _ => return Err(unknown_key(e)),
        }
    }
    let missing = |what: &str| Error::Parse {
        line: section.line,
        message: format!("[{}] is missing '{what}'", section.name),
    };
    let shape = match section.name.as_str() {
        "plane" => Shape::Plane {
            origin: a.ok_or_else(|| missing("origin"))?,
            u: b.ok_or_else(|| missing("u"))?,
            v: c.ok_or_else(|| missing("v"))?,
        },
        "box" => Shape::Box {
            min: a.ok_or_else(|| missing("min"))?,
            max: b.ok_or_else(|| missing("max"))?,
            open_bottom,
        },
        _ => Shape::Cylinder {
            base: a.ok_or_else(|| missing("base"))?,
            axis: b.ok_or_else(|| missing("axis"))?,
            radius: radius.ok_or_else(|| missing("radius"))?,
        },
    };
    let density = density.ok_or_else(|| missing("density"))?;
    if !density.is_finite() || density <= 0.0 || noise < 0.0 || color_noise < 0.0 {
        return Err(Error::Parse {
            line: section.line,
            message: "density must be positive and noise levels non-negative".into(),
        });
    }
    Ok(Primitive {
        shape,
        class: class.ok_or_else(|| missing("class"))?,
        density,
        color,
        color_noise,
        noise,
        intensity,
    })
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// A parametric surface patch `(s, t) in [0,1)^2 -> R^3`.
#[derive(Debug, Clone, Copy)]
enum Surface {
    Parallelogram { origin: [f64; 3], u: [f64; 3], v: [f64; 3] },
    Tube { base: [f64; 3], axis: [f64; 3], e1: [f64; 3], e2: [f64; 3], radius: f64 },
}

impl Surface {
    /// Lengths of the two parameter directions.
    fn extents(&self) -> (f64, f64) {
        match *self {
            Surface::Parallelogram { u, v, .. } => (norm(u), norm(v)),
            Surface::Tube { axis, radius, .. } => (2.0 * std::f64::consts::PI * radius, norm(axis)),
        }
    }

    fn area(&self) -> f64 {
        match *self {
            Surface::Parallelogram { u, v, .. } => norm(cross(u, v)),
            Surface::Tube { .. } => {
                let (a, b) = self.extents();
                a * b
            }
        }
    }

    fn point(&self, s: f64, t: f64) -> [f64; 3] {
        match *self {
            Surface::Parallelogram { origin, u, v } => {
                [0, 1, 2].map(|a| origin[a] + s * u[a] + t * v[a])
            }
            Surface::Tube { base, axis, e1, e2, radius } => {
                let th = 2.0 * std::f64::consts::PI * s;
                let (c, sn) = (th.cos(), th.sin());
                [0, 1, 2].map(|a| base[a] + t * axis[a] + radius * (c * e1[a] + sn * e2[a]))
            }
        }
    }
}

fn surfaces(shape: &Shape) -> Vec<Surface> {
    match *shape {
        Shape::Plane { origin, u, v } => vec![Surface::Parallelogram { origin, u, v }],
        Shape::Box { min, max, open_bottom } => {
            let d = sub(max, min);
            let (dx, dy, dz) = ([d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]);
            let mut faces = Vec::with_capacity(6);
            if !open_bottom {
                faces.push(Surface::Parallelogram { origin: min, u: dx, v: dy });
            }
            let top = [min[0], min[1], max[2]];
            faces.push(Surface::Parallelogram { origin: top, u: dx, v: dy });
            faces.push(Surface::Parallelogram { origin: min, u: dx, v: dz });
            faces.push(Surface::Parallelogram { origin: [min[0], max[1], min[2]], u: dx, v: dz });
            faces.push(Surface::Parallelogram { origin: min, u: dy, v: dz });
            faces.push(Surface::Parallelogram { origin: [max[0], min[1], min[2]], u: dy, v: dz });
            faces
        }
        Shape::Cylinder { base, axis, radius } => {
            let a = norm(axis);
            let dir = axis.map(|x| x / a);
            let helper = if dir[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let e1 = cross(dir, helper);
            let n1 = norm(e1);
            let e1 = e1.map(|x| x / n1);
            let e2 = cross(dir, e1);
            vec![Surface::Tube { base, axis, e1, e2, radius }]
        }
    }
}

/// Exactly `n` stratified samples over `surface`.
fn stratified_samples(surface: &Surface, n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    if n == 0 {
        return Vec::new();
    }
    let (lu, lv) = surface.extents();
    let area = (lu * lv).max(f64::MIN_POSITIVE);
    let per_len = (n as f64 / area).sqrt();
    let nu = ((lu * per_len).ceil() as usize).clamp(1, n);
    let nv = n.div_ceil(nu);
    let cells = nu * nv;
    let mut keep = vec![true; cells];
    for drop in sample(rng, cells, cells - n).into_iter() {
        keep[drop] = false;
    }
    let mut out = Vec::with_capacity(n);
    for j in 0..nv {
        for i in 0..nu {
            if !keep[j * nu + i] {
                continue;
            }
            let s = (i as f64 + rng.random::<f64>()) / nu as f64;
            let t = (j as f64 + rng.random::<f64>()) / nv as f64;
            out.push(surface.point(s, t));
        }
    }
    out
}

/// Scene used by the scaled quality check and by benchmarks.
pub const QUALITY_SCENE: &str = include_str!("../scenes/quality.scene");

/// Seed the quality check is calibrated with.
pub const QUALITY_SEED: u64 = 2024;

/// The quality scene rescaled to roughly `n_points` points.
pub fn bench_cloud(n_points: usize, seed: u64) -> Result<PointCloud> {
    let mut spec = SceneSpec::parse(QUALITY_SCENE)?;
    if n_points == 0 {
        return Err(Error::invalid("benchmark cloud needs at least one point"));
    }
    spec.density_scale = n_points as f64 / spec.expected_points() as f64;
    synth_scene(seed, &spec)
}

/// Generates the labeled cloud for `spec`. Identical seeds give identical
/// clouds.
pub fn synth_scene(seed: u64, spec: &SceneSpec) -> Result<PointCloud> {
    if spec.primitives.is_empty() {
        return Err(Error::invalid("scene has no primitives"));
    }
    let with_intensity = spec.primitives.iter().any(|p| p.intensity.is_some());
    let mut positions = Vec::new();
    let mut colors = Vec::new();
    let mut intensity = Vec::new();
    let mut labels = Vec::new();
    for (i, prim) in spec.primitives.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, &format!("primitive-{i}")));
        let noise = Normal::new(0.0, prim.noise).map_err(|e| Error::invalid(e.to_string()))?;
        for surface in surfaces(&prim.shape) {
            let n = (prim.density * spec.density_scale * surface.area()).round() as usize;
            for p in stratified_samples(&surface, n, &mut rng) {
                let jittered = if prim.noise > 0.0 {
                    p.map(|x| x + noise.sample(&mut rng))
                } else {
                    p
                };
                positions.push(jittered);
                colors.push(prim.color.map(|c| {
                    let j = if prim.color_noise > 0.0 {
                        prim.color_noise * (2.0 * rng.random::<f64>() - 1.0)
                    } else {
                        0.0
                    };
                    (c + j).clamp(0.0, 1.0)
                }));
                intensity.push(prim.intensity.unwrap_or(0.0));
                labels.push(prim.class);
            }
        }
    }
    if positions.is_empty() {
        return Err(Error::invalid("scene produced no points"));
    }
    let max_class = labels.iter().max().map_or(0, |&m| m + 1);
    let cloud = PointCloud {
        positions,
        colors: Some(colors),
        intensity: with_intensity.then_some(intensity),
        labels: Some(labels),
        num_classes: spec.num_classes.unwrap_or(max_class).max(max_class),
    };
    cloud.validate()?;
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLOOR_AND_BOX: &str = "
[plane]
class = 0
origin = 0, 0, 0
u = 2, 0, 0
v = 0, 2, 0
density = 1000
noise = 0.002
color = 0.5, 0.5, 0.5

[box]
class = 1
min = 0.5, 0.5, 0
max = 1.0, 1.0, 0.4
open_bottom = true
density = 800
noise = 0.002
";

    #[test]
    fn deterministic_for_a_seed() {
        let spec = SceneSpec::parse(FLOOR_AND_BOX).unwrap();
        let a = synth_scene(7, &spec).unwrap();
        let b = synth_scene(7, &spec).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synth_scene(8, &spec).unwrap());
        assert_eq!(a.len(), spec.expected_points());
    }

    #[test]
    fn plane_point_count_is_exact() {
        let spec = SceneSpec::parse(
            "[plane]\nclass = 0\norigin = 0,0,0\nu = 2,0,0\nv = 0,2,0\ndensity = 1000\n",
        )
        .unwrap();
        for seed in 0..3 {
            assert_eq!(synth_scene(seed, &spec).unwrap().len(), 4000);
        }
    }

    #[test]
    fn empty_spec_rejected() {
        let spec = SceneSpec::parse("[scene]\nnum_classes = 2\n").unwrap();
        assert!(matches!(synth_scene(1, &spec), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(SceneSpec::parse("[plane]\nclass = 0\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(SceneSpec::parse("[cone]\n"), Err(Error::Parse { .. })));
        assert!(matches!(
            SceneSpec::parse("[plane]\nclass = 0\nradius = 2\n"),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn seam_has_points_of_both_classes() {
        let text = "
[plane]
class = 0
origin = 0, 0, 0
u = 1, 0, 0
v = 0, 1, 0
density = 4000
noise = 0.003

[plane]
class = 1
origin = 1, 0, 0
u = 1, 0, 0
v = 0, 1, 0
density = 4000
noise = 0.003
";
        let cloud = synth_scene(3, &SceneSpec::parse(text).unwrap()).unwrap();
        let labels = cloud.labels.as_ref().unwrap();
        for class in [0, 1] {
            let near = cloud
                .positions
                .iter()
                .zip(labels)
                .filter(|(p, &l)| l == class && (p[0] - 1.0).abs() <= 2.0 * 0.003)
                .count();
            assert!(near > 0, "class {class} has no point near the seam");
        }
    }

    #[test]
    fn cylinder_points_lie_on_the_surface() {
        let text = "[cylinder]\nclass = 0\nbase = 1,1,0\naxis = 0,0,2\nradius = 0.5\ndensity = 500\n";
        let cloud = synth_scene(1, &SceneSpec::parse(text).unwrap()).unwrap();
        for p in &cloud.positions {
            let r = ((p[0] - 1.0).powi(2) + (p[1] - 1.0).powi(2)).sqrt();
            assert!((r - 0.5).abs() < 1e-12);
            assert!((0.0..2.0).contains(&p[2]));
        }
    }
}
