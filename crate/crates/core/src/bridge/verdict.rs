use serde::{Deserialize, Serialize};

use crate::geometry::Aabb;
use crate::rules::{evaluate, explain, DerivationTree, Fact, Model, Value};

use super::{BridgeError, FactBase, Rulebase};

/// Which rule variant concluded red.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RedVariant {
    StoppedVehicleInFront,
    CrossTraffic,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightVerdict {
    pub frame: u64,
    pub red: bool,
    pub applicable: bool,
    /// Present iff a rule concluded red or green.
    pub derivation: Option<DerivationTree>,
}

impl LightVerdict {
    pub fn variant(&self) -> Option<RedVariant> {
        if !self.red {
            return None;
        }
        let tree = self.derivation.as_ref()?;
        let preds: Vec<&str> = tree.children.iter().map(|c| c.fact.pred.as_str()).collect();
        Some(if preds.contains(&"stopped_vehicle_in_front") {
            RedVariant::StoppedVehicleInFront
        } else if preds.contains(&"collective_up_straight") {
            RedVariant::CrossTraffic
        } else {
            RedVariant::Other
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleVerdict {
    pub frame: u64,
    /// A collective lane change that no intersection explains.
    pub obstacle: bool,
    pub applicable: bool,
    /// No detected obstacle accounts for the lane change either.
    pub undetected: bool,
    /// Region the undetected obstacle is inferred in.
    pub location: Option<Aabb>,
    /// Present iff a rule concluded obstacle or clear.
    pub derivation: Option<DerivationTree>,
}

fn unary(pred: &str, frame: u64) -> Fact {
    Fact::new(pred, vec![Value::from(frame)])
}

fn run(facts: &FactBase, rulebase: &Rulebase) -> Result<Model, BridgeError> {
    Ok(evaluate(&rulebase.program, &facts.facts)?)
}

fn first_with_frame(model: &Model, pred: &str, frame: u64) -> Option<Fact> {
    let f = Value::from(frame);
    model.query(pred).into_iter().find(|x| x.args.first() == Some(&f))
}

/// Whether the rulebase's `logic_applies` holds for the frame.
pub fn logic_applicable(facts: &FactBase, rulebase: &Rulebase) -> Result<bool, BridgeError> {
    Ok(run(facts, rulebase)?.contains(&unary("logic_applies", facts.frame)))
}

pub fn logic_light_verdict(facts: &FactBase, rulebase: &Rulebase) -> Result<LightVerdict, BridgeError> {
    let model = run(facts, rulebase)?;
    let red_fact = unary("red_traffic_light", facts.frame);
    let green_fact = unary("green_traffic_light", facts.frame);
    let red = model.contains(&red_fact);
    let derivation = if red {
        Some(explain(&model, &red_fact)?)
    } else if model.contains(&green_fact) {
        Some(explain(&model, &green_fact)?)
    } else {
        None
    };
    Ok(LightVerdict {
        frame: facts.frame,
        red,
        applicable: model.contains(&unary("logic_applies", facts.frame)),
        derivation,
    })
}

pub fn logic_obstacle_verdict(facts: &FactBase, rulebase: &Rulebase) -> Result<ObstacleVerdict, BridgeError> {
    let model = run(facts, rulebase)?;
    let obstacle_fact = unary("obstacle_ahead", facts.frame);
    let obstacle = model.contains(&obstacle_fact);
    let undetected = first_with_frame(&model, "undetected_obstacle", facts.frame);
    let location = first_with_frame(&model, "obstacle_location", facts.frame).and_then(|l| {
        let c: Vec<f64> = l.args[1..].iter().filter_map(Value::as_f64).collect();
        (c.len() == 4).then(|| Aabb::new(c[0], c[1], c[2], c[3]))
    });
    let derivation = match (&undetected, obstacle) {
        (Some(u), _) => Some(explain(&model, u)?),
        (None, true) => Some(explain(&model, &obstacle_fact)?),
        (None, false) => {
            let clear = unary("no_obstacle_ahead", facts.frame);
            if model.contains(&clear) {
                Some(explain(&model, &clear)?)
            } else {
                None
            }
        }
    };
    Ok(ObstacleVerdict {
        frame: facts.frame,
        obstacle,
        applicable: model.contains(&unary("logic_applies", facts.frame)),
        undetected: undetected.is_some(),
        location,
        derivation,
    })
}
