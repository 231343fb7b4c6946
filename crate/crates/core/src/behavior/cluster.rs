use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{mean_heading, Aabb};

use super::{dbscan, BehaviorCategory, BehaviorError, BehaviorEvent};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    /// Sliding window length, seconds.
    pub window: f64,
    pub eps: f64,
    pub min_size: usize,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig { window: 20.0, eps: 2.7, min_size: 2 }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<(), BehaviorError> {
        if !(self.window > 0.0) || !(self.eps > 0.0) || self.min_size < 1 {
            return Err(BehaviorError::Config("window and eps must be positive, min_size at least 1".into()));
        }
        Ok(())
    }
}

/// Reference to one member event: vehicle and start frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MemberEvent {
    pub vehicle: u32,
    pub start_frame: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorCluster {
    pub id: usize,
    pub category: BehaviorCategory,
    pub members: Vec<u32>,
    pub events: Vec<MemberEvent>,
    pub frame_start: u64,
    pub frame_end: u64,
    /// Bounding box of the member events' start locations.
    #[serde(flatten)]
    pub bbox: Aabb,
    pub ego_member: bool,
    /// Circular mean of the member events' start headings.
    #[serde(default)]
    pub heading: f64,
}

/// A cluster whose behaviour differs from what its members were doing before.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionChange {
    pub frame_start: u64,
    pub frame_end: u64,
    pub action: BehaviorCategory,
    pub ego: bool,
    #[serde(flatten)]
    pub bbox: Aabb,
    #[serde(default)]
    pub heading: f64,
}

/// Clusters the events that started within the window ending at `now`
/// (seconds; `now_frame` is the matching frame index). Ongoing events are
/// clipped at `now_frame`. Categories are clustered independently, in
/// declaration order.
pub fn cluster_behaviors(
    events: &[BehaviorEvent],
    now: f64,
    now_frame: u64,
    config: &ClusteringConfig,
    ego_id: u32,
) -> Result<Vec<BehaviorCluster>, BehaviorError> {
    config.validate()?;
    let lo = now - config.window - 1e-9;
    let mut clusters = Vec::new();
    for category in BehaviorCategory::ALL {
        let recent: Vec<&BehaviorEvent> = events
            .iter()
            .filter(|e| e.category == category && e.start_time >= lo && e.start_time <= now + 1e-9)
            .collect();
        if recent.is_empty() {
            continue;
        }
        let points: Vec<(f64, f64)> = recent.iter().map(|e| (e.start_x, e.start_y)).collect();
        let labels = dbscan(&points, config.eps, config.min_size);
        let mut groups: BTreeMap<usize, Vec<&BehaviorEvent>> = BTreeMap::new();
        for (e, l) in recent.iter().zip(&labels) {
            if let Some(l) = l {
                groups.entry(*l).or_default().push(e);
            }
        }
        for members in groups.into_values() {
            let mut ids: Vec<u32> = members.iter().map(|e| e.vehicle).collect();
            ids.sort_unstable();
            ids.dedup();
            if ids.len() < config.min_size {
                continue;
            }
            let mut refs: Vec<MemberEvent> =
                members.iter().map(|e| MemberEvent { vehicle: e.vehicle, start_frame: e.start_frame }).collect();
            refs.sort();
            clusters.push(BehaviorCluster {
                id: clusters.len(),
                category,
                ego_member: ids.contains(&ego_id),
                members: ids,
                events: refs,
                frame_start: members.iter().map(|e| e.start_frame).min().unwrap_or(now_frame),
                frame_end: members.iter().map(|e| e.end_frame.min(now_frame)).max().unwrap_or(now_frame),
                bbox: Aabb::from_points(members.iter().map(|e| (e.start_x, e.start_y))).expect("non-empty cluster"),
                heading: mean_heading(members.iter().map(|e| e.heading)).unwrap_or(0.0),
            });
        }
    }
    Ok(clusters)
}

/// Emits an [`ActionChange`] for each cluster whose category differs from the
/// majority category of its members' preceding events. Members without a
/// preceding event do not vote; ties go to the earlier category.
pub fn detect_action_changes(clusters: &[BehaviorCluster], events: &[BehaviorEvent]) -> Vec<ActionChange> {
    let mut by_vehicle: BTreeMap<u32, Vec<&BehaviorEvent>> = BTreeMap::new();
    for e in events {
        by_vehicle.entry(e.vehicle).or_default().push(e);
    }
    for list in by_vehicle.values_mut() {
        list.sort_by_key(|e| e.start_frame);
    }
    clusters
        .iter()
        .filter_map(|c| {
            let mut votes = [0usize; BehaviorCategory::ALL.len()];
            for m in &c.events {
                let prior = by_vehicle
                    .get(&m.vehicle)
                    .and_then(|list| list.iter().rfind(|e| e.start_frame < m.start_frame));
                if let Some(p) = prior {
                    votes[p.category.index()] += 1;
                }
            }
            let best = votes.iter().enumerate().fold(None, |acc: Option<(usize, usize)>, (i, &v)| match acc {
                Some((_, bv)) if bv >= v => acc,
                _ if v > 0 => Some((i, v)),
                _ => acc,
            });
            let (dominant, _) = best?;
            (BehaviorCategory::ALL[dominant] != c.category).then_some(ActionChange {
                frame_start: c.frame_start,
                frame_end: c.frame_end,
                action: c.category,
                ego: c.ego_member,
                bbox: c.bbox,
                heading: c.heading,
            })
        })
        .collect()
}
