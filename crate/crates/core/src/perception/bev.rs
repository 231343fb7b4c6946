use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::edl::DirichletPrediction;
use crate::geometry::Aabb;
use crate::sim::{Frame, Network};

use super::PerceptionConfig;

pub const BEV_CLASSES: usize = 4;
/// Evidence floor for cells covered by an out-of-distribution object.
const OOD_EVIDENCE: f64 = 0.05;
/// Evidence scale for the dominant class of a clear-weather cell.
const EVIDENCE_SCALE: f64 = 100.0;
/// Cells above this epistemic uncertainty count as uncertain.
const UNCERTAIN_CELL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BevClass {
    Vehicle,
    Drivable,
    LaneMarking,
    Other,
    /// Covered by an object the segmentation model never saw.
    OutOfDistribution,
}

impl BevClass {
    pub fn index(&self) -> Option<usize> {
        match self {
            BevClass::Vehicle => Some(0),
            BevClass::Drivable => Some(1),
            BevClass::LaneMarking => Some(2),
            BevClass::Other => Some(3),
            BevClass::OutOfDistribution => None,
        }
    }
}

/// Ego-centred, heading-aligned grid. Row 0 is the far front edge, column 0
/// the far left edge.
#[derive(Debug, Clone, PartialEq)]
pub struct BevGrid {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
    pub alpha: Vec<[f64; BEV_CLASSES]>,
    pub truth: Vec<BevClass>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BevSummary {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
    pub mean_epistemic: f64,
    /// Maximum epistemic uncertainty in the ego-lane corridor ahead.
    pub epistemic_ahead: f64,
    pub uncertain_cells: usize,
}

impl BevGrid {
    /// Offset of a cell centre from the ego: (forward, left) metres.
    pub fn cell_offset(&self, row: usize, col: usize) -> (f64, f64) {
        let half_f = self.rows as f64 * self.cell_size / 2.0;
        let half_l = self.cols as f64 * self.cell_size / 2.0;
        (half_f - (row as f64 + 0.5) * self.cell_size, half_l - (col as f64 + 0.5) * self.cell_size)
    }

    pub fn cell(&self, row: usize, col: usize) -> DirichletPrediction {
        DirichletPrediction { alpha: self.alpha[row * self.cols + col].to_vec() }
    }

    pub fn u_epis(&self, row: usize, col: usize) -> f64 {
        u_epis(&self.alpha[row * self.cols + col])
    }

    pub fn summary(&self, lane_width: f64, lookahead: f64) -> BevSummary {
        let mut total = 0.0;
        let mut ahead: f64 = 0.0;
        let mut uncertain = 0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let u = self.u_epis(r, c);
                total += u;
                if u > UNCERTAIN_CELL {
                    uncertain += 1;
                }
                let (f, l) = self.cell_offset(r, c);
                if f > 0.0 && f <= lookahead && l.abs() <= lane_width / 2.0 {
                    ahead = ahead.max(u);
                }
            }
        }
        BevSummary {
            rows: self.rows,
            cols: self.cols,
            cell_size: self.cell_size,
            mean_epistemic: total / (self.rows * self.cols).max(1) as f64,
            epistemic_ahead: ahead,
            uncertain_cells: uncertain,
        }
    }
}

fn u_epis(alpha: &[f64; BEV_CLASSES]) -> f64 {
    BEV_CLASSES as f64 / alpha.iter().sum::<f64>()
}

/// Rasterises the ground truth around the ego and converts every cell to a
/// Dirichlet: strong evidence for the true class that fades with weather
/// noise, and almost none for cells covered by out-of-distribution objects.
pub fn bev_rasterize(frame: &Frame, config: &PerceptionConfig, rng: &mut impl Rng) -> BevGrid {
    let network = Network::new(&config.map);
    let ego = frame.ego();
    let n = (config.extent / config.cell_size).round() as usize;
    let (sin, cos) = ego.heading.sin_cos();
    let reach = config.extent * std::f64::consts::SQRT_2 / 2.0 + 10.0;
    let near = |b: &Aabb| {
        let (x, y) = b.center();
        (x - ego.x).hypot(y - ego.y) <= reach
    };
    let ood: Vec<Aabb> = frame
        .obstacles
        .iter()
        .filter(|o| config.ood_classes.contains(&o.kind) && near(&o.bbox))
        .map(|o| o.bbox)
        .collect();
    let solid: Vec<Aabb> = frame
        .vehicles
        .iter()
        .map(|v| v.bbox)
        .chain(frame.obstacles.iter().filter(|o| !config.ood_classes.contains(&o.kind)).map(|o| o.bbox))
        .filter(near)
        .collect();

    let mut grid = BevGrid {
        rows: n,
        cols: n,
        cell_size: config.cell_size,
        alpha: Vec::with_capacity(n * n),
        truth: Vec::with_capacity(n * n),
    };
    let half_cell = config.cell_size / 2.0;
    let dominant = EVIDENCE_SCALE / (1.0 + 4.0 * config.weather_noise);
    for r in 0..n {
        for c in 0..n {
            let (f, l) = grid.cell_offset(r, c);
            let x = ego.x + f * cos - l * sin;
            let y = ego.y + f * sin + l * cos;
            // Small out-of-distribution objects may fall between cell centres,
            // so they claim every cell they overlap.
            let cell = Aabb::new(x - half_cell, y - half_cell, x + half_cell, y + half_cell);
            let class = if ood.iter().any(|b| b.overlaps(&cell)) {
                BevClass::OutOfDistribution
            } else if solid.iter().any(|b| b.contains(x, y)) {
                BevClass::Vehicle
            } else {
                let (wx, wy) = (x.rem_euclid(network.width), y.rem_euclid(network.height));
                if network.is_lane_marking(wx, wy, config.cell_size / 2.0) {
                    BevClass::LaneMarking
                } else if network.is_on_road(wx, wy) {
                    BevClass::Drivable
                } else {
                    BevClass::Other
                }
            };
            let alpha = match class.index() {
                None => [1.0 + OOD_EVIDENCE; BEV_CLASSES],
                Some(k) => {
                    let mut a = [0.0; BEV_CLASSES];
                    for (i, ai) in a.iter_mut().enumerate() {
                        let e = if i == k {
                            dominant * rng.random_range(0.8..1.2)
                        } else {
                            config.weather_noise * rng.random_range(0.0..2.0)
                        };
                        *ai = 1.0 + e;
                    }
                    a
                }
            };
            grid.alpha.push(alpha);
            grid.truth.push(class);
        }
    }
    grid
}
