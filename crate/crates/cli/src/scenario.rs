//! Scenario files: the JSON grammar for sets, targets, and tolerance
//! profiles, and its conversion into the core types.
//!
//! Targets come from a closed grammar rather than user code so that a
//! scenario plus a seed pins every byte of every artifact.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use carleman_core::fixtures;
use carleman_core::func::AnalyticMap;
use carleman_core::geom::{Region, Shape, Window};
use carleman_core::noncrit::NonCritParams;
use carleman_core::pipeline::PipelineParams;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub set: SetSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<EpsSpec>,
    #[serde(default, skip_serializing_if = "PipelineSpec::is_default")]
    pub pipeline: PipelineSpec,
    /// Required: every run is reproducible from the file plus this seed.
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSpec {
    /// `[x0, y0, x1, y1]` in window units.
    pub window: [f64; 4],
    pub resolution: f64,
    pub shapes: Vec<ShapeSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Disc {
        center: [f64; 2],
        radius: f64,
    },
    Rect {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
    },
    Annulus {
        center: [f64; 2],
        inner: f64,
        outer: f64,
    },
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
    Polyline {
        vertices: Vec<[f64; 2]>,
    },
    Point {
        at: [f64; 2],
    },
    Dilation {
        base: Box<ShapeSpec>,
        amount: f64,
    },
    /// One of the worked example sets shipped with the library, re-hosted
    /// on the scenario's window and resolution.
    Named {
        name: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// Ascending coefficients of a polynomial in `z`, each `[re, im]`.
    Polynomial { coeffs: Vec<[f64; 2]> },
    /// `a * exp(b z)`.
    Exp { a: [f64; 2], b: [f64; 2] },
    /// `a + b z + c sin(d z)`.
    AffineSin {
        a: [f64; 2],
        b: [f64; 2],
        c: [f64; 2],
        d: [f64; 2],
    },
    /// Piece targets selected by shape membership, first match wins;
    /// points on no piece use the default.
    Piecewise {
        pieces: Vec<TargetPiece>,
        default: Box<TargetSpec>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetPiece {
    pub shapes: Vec<ShapeSpec>,
    pub target: TargetSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EpsSpec {
    Constant { value: f64 },
    Piecewise { pieces: Vec<EpsPiece>, default: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsPiece {
    pub shapes: Vec<ShapeSpec>,
    pub value: f64,
}

/// Optional knobs; anything absent falls back to the library defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stages: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_degree: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_bias: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_tol: Option<f64>,
}

impl PipelineSpec {
    pub fn is_default(&self) -> bool {
        *self == PipelineSpec::default()
    }

    pub fn params(&self, seed: u64) -> PipelineParams {
        let d = PipelineParams::default();
        PipelineParams {
            stages: self.stages.unwrap_or(d.stages),
            density: self.density.unwrap_or(d.density),
            boundary_bias: self.boundary_bias.unwrap_or(d.boundary_bias),
            seed,
            max_degree: self.max_degree.unwrap_or(d.max_degree),
            quad_tol: self.quad_tol.unwrap_or(d.quad_tol),
        }
    }

    pub fn noncrit_params(&self, seed: u64) -> NonCritParams {
        let d = NonCritParams::default();
        NonCritParams {
            density: self.density.unwrap_or(d.density),
            boundary_bias: self.boundary_bias.unwrap_or(d.boundary_bias),
            seed,
            max_degree: self.max_degree.unwrap_or(d.max_degree),
            quad_tol: self.quad_tol.unwrap_or(d.quad_tol),
        }
    }
}

fn cx(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

impl ShapeSpec {
    /// Expand into core shapes; `Named` may yield many.
    fn build(&self, window: Window, resolution: f64) -> Result<Vec<Shape>> {
        Ok(match self {
            ShapeSpec::Disc { center, radius } => vec![Shape::Disc {
                center: cx(*center),
                radius: *radius,
            }],
            ShapeSpec::Rect { x0, y0, x1, y1 } => vec![Shape::Rect {
                x0: *x0,
                y0: *y0,
                x1: *x1,
                y1: *y1,
            }],
            ShapeSpec::Annulus {
                center,
                inner,
                outer,
            } => vec![Shape::Annulus {
                center: cx(*center),
                inner: *inner,
                outer: *outer,
            }],
            ShapeSpec::Polygon { vertices } => vec![Shape::Polygon {
                vertices: vertices.iter().map(|p| cx(*p)).collect(),
            }],
            ShapeSpec::Polyline { vertices } => vec![Shape::Polyline {
                vertices: vertices.iter().map(|p| cx(*p)).collect(),
            }],
            ShapeSpec::Point { at } => vec![Shape::Point { at: cx(*at) }],
            ShapeSpec::Dilation { base, amount } => {
                let inner = base.build(window, resolution)?;
                inner
                    .into_iter()
                    .map(|s| Shape::Dilation {
                        base: Box::new(s),
                        amount: *amount,
                    })
                    .collect()
            }
            ShapeSpec::Named { name } => {
                let region = match name.as_str() {
                    "e1" => fixtures::e1_region(resolution),
                    "e2" => fixtures::e2_region(window, resolution),
                    "annulus" => fixtures::annulus_region(resolution),
                    "segment" => fixtures::segment_region(resolution),
                    "graph" => fixtures::graph_region(resolution),
                    other => bail!(
                        "set.shapes: unknown named set {other:?} \
                         (known: e1, e2, annulus, segment, graph)"
                    ),
                }
                .with_context(|| format!("building named set {name:?}"))?;
                region.shapes
            }
        })
    }
}

fn build_region(shapes: &[ShapeSpec], window: Window, resolution: f64) -> Result<Region> {
    let mut out = Vec::new();
    for s in shapes {
        out.extend(s.build(window, resolution)?);
    }
    Ok(Region::new(out, window, resolution)?)
}

/// A target built from the grammar.  Every variant is analytic at every
/// point it is asked about; the piecewise variant delegates by membership
/// and is analytic wherever its selection is locally constant.
pub enum ScenarioTarget {
    Polynomial {
        p: carleman_core::poly::CPoly,
        dp: carleman_core::poly::CPoly,
    },
    Exp {
        a: Complex64,
        b: Complex64,
    },
    AffineSin {
        a: Complex64,
        b: Complex64,
        c: Complex64,
        d: Complex64,
    },
    Piecewise {
        pieces: Vec<(Region, ScenarioTarget)>,
        default: Box<ScenarioTarget>,
    },
}

impl ScenarioTarget {
    fn select(&self, z: Complex64) -> &ScenarioTarget {
        match self {
            ScenarioTarget::Piecewise { pieces, default } => pieces
                .iter()
                .find(|(r, _)| r.contains(z))
                .map(|(_, t)| t)
                .unwrap_or(default),
            other => other,
        }
    }
}

impl AnalyticMap for ScenarioTarget {
    fn eval(&self, z: Complex64) -> Complex64 {
        match self.select(z) {
            ScenarioTarget::Polynomial { p, .. } => p.eval(z),
            ScenarioTarget::Exp { a, b } => a * (b * z).exp(),
            ScenarioTarget::AffineSin { a, b, c, d } => a + b * z + c * (d * z).sin(),
            ScenarioTarget::Piecewise { .. } => unreachable!("select flattens one level"),
        }
    }

    fn deriv(&self, z: Complex64) -> Complex64 {
        match self.select(z) {
            ScenarioTarget::Polynomial { dp, .. } => dp.eval(z),
            ScenarioTarget::Exp { a, b } => a * b * (b * z).exp(),
            ScenarioTarget::AffineSin { b, c, d, .. } => b + c * d * (d * z).cos(),
            ScenarioTarget::Piecewise { .. } => unreachable!("select flattens one level"),
        }
    }
}

impl TargetSpec {
    fn build(&self, window: Window, resolution: f64, depth: usize) -> Result<ScenarioTarget> {
        Ok(match self {
            TargetSpec::Polynomial { coeffs } => {
                if coeffs.is_empty() {
                    bail!("target.coeffs: a polynomial needs at least one coefficient");
                }
                let p = carleman_core::poly::CPoly::new(coeffs.iter().map(|c| cx(*c)).collect());
                let dp = p.derivative();
                ScenarioTarget::Polynomial { p, dp }
            }
            TargetSpec::Exp { a, b } => ScenarioTarget::Exp { a: cx(*a), b: cx(*b) },
            TargetSpec::AffineSin { a, b, c, d } => ScenarioTarget::AffineSin {
                a: cx(*a),
                b: cx(*b),
                c: cx(*c),
                d: cx(*d),
            },
            TargetSpec::Piecewise { pieces, default } => {
                if depth > 0 {
                    bail!("target: piecewise targets do not nest");
                }
                let mut built = Vec::with_capacity(pieces.len());
                for (i, piece) in pieces.iter().enumerate() {
                    let region = build_region(&piece.shapes, window, resolution)
                        .with_context(|| format!("target.pieces[{i}].shapes"))?;
                    let t = piece
                        .target
                        .build(window, resolution, depth + 1)
                        .with_context(|| format!("target.pieces[{i}].target"))?;
                    built.push((region, t));
                }
                ScenarioTarget::Piecewise {
                    pieces: built,
                    default: Box::new(default.build(window, resolution, depth + 1)?),
                }
            }
        })
    }
}

/// Positive pointwise tolerance, first matching piece wins.
pub struct EpsProfile {
    pieces: Vec<(Region, f64)>,
    default: f64,
}

impl EpsProfile {
    pub fn at(&self, z: Complex64) -> f64 {
        self.pieces
            .iter()
            .find(|(r, _)| r.contains(z))
            .map(|(_, v)| *v)
            .unwrap_or(self.default)
    }
}

impl EpsSpec {
    fn build(&self, window: Window, resolution: f64) -> Result<EpsProfile> {
        match self {
            EpsSpec::Constant { value } => {
                if !(*value > 0.0) {
                    bail!("epsilon.value must be positive, got {value}");
                }
                Ok(EpsProfile {
                    pieces: Vec::new(),
                    default: *value,
                })
            }
            EpsSpec::Piecewise { pieces, default } => {
                if !(*default > 0.0) {
                    bail!("epsilon.default must be positive, got {default}");
                }
                let mut built = Vec::with_capacity(pieces.len());
                for (i, piece) in pieces.iter().enumerate() {
                    if !(piece.value > 0.0) {
                        bail!("epsilon.pieces[{i}].value must be positive, got {}", piece.value);
                    }
                    let region = build_region(&piece.shapes, window, resolution)
                        .with_context(|| format!("epsilon.pieces[{i}].shapes"))?;
                    built.push((region, piece.value));
                }
                Ok(EpsProfile {
                    pieces: built,
                    default: *default,
                })
            }
        }
    }
}

/// A scenario parsed, overridden, and partially built: the set region is
/// constructed eagerly, targets and tolerances on demand.
pub struct Loaded {
    pub scenario: Scenario,
    /// Hash of the file bytes as read, before overrides.
    pub sha256: String,
    pub region: Region,
}

impl Loaded {
    pub fn from_file(
        path: &Path,
        resolution: Option<f64>,
        seed: Option<u64>,
    ) -> Result<Loaded> {
        let bytes =
            fs::read(path).with_context(|| format!("reading scenario {}", path.display()))?;
        let sha256 = hex::encode(Sha256::digest(&bytes));
        let scenario: Scenario = serde_json::from_slice(&bytes)
            .with_context(|| format!("scenario {}", path.display()))?;
        Loaded::from_scenario(scenario, sha256, resolution, seed)
    }

    pub fn from_scenario(
        mut scenario: Scenario,
        sha256: String,
        resolution: Option<f64>,
        seed: Option<u64>,
    ) -> Result<Loaded> {
        if let Some(h) = resolution {
            scenario.set.resolution = h;
        }
        if let Some(s) = seed {
            scenario.seed = s;
        }
        let [x0, y0, x1, y1] = scenario.set.window;
        let window = Window::new(x0, y0, x1, y1).context("set.window")?;
        if scenario.set.shapes.is_empty() {
            bail!("set.shapes must not be empty");
        }
        let region = build_region(&scenario.set.shapes, window, scenario.set.resolution)
            .context("set.shapes")?;
        Ok(Loaded {
            scenario,
            sha256,
            region,
        })
    }

    pub fn window(&self) -> Window {
        self.region.window
    }

    pub fn target(&self) -> Result<ScenarioTarget> {
        let spec = self
            .scenario
            .target
            .as_ref()
            .context("this command needs a \"target\" entry in the scenario")?;
        spec.build(self.window(), self.region.resolution, 0)
            .context("target")
    }

    pub fn epsilon(&self) -> Result<EpsProfile> {
        let spec = self
            .scenario
            .epsilon
            .as_ref()
            .context("this command needs an \"epsilon\" entry in the scenario")?;
        spec.build(self.window(), self.region.resolution).context("epsilon")
    }
}
