use crate::geometry::Aabb;
use crate::sim::Frame;

use super::PerceptionError;

/// Line-of-sight test from the observer's centre to the centre of `target`.
/// Vehicles whose box contains the target centre are the target itself and
/// never block it.
pub fn occlusion_check(frame: &Frame, observer_id: u32, target: &Aabb) -> Result<bool, PerceptionError> {
    let observer = frame.vehicle(observer_id).ok_or(PerceptionError::UnknownObserver(observer_id))?;
    let from = (observer.x, observer.y);
    let to = target.center();
    let blocked = frame
        .vehicles
        .iter()
        .filter(|v| v.id != observer_id && !v.bbox.contains(to.0, to.1))
        .any(|v| v.bbox.intersects_segment(from, to));
    Ok(!blocked)
}
