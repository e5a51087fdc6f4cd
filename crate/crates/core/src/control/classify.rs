use super::{ControlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncounterClassification {
    /// No communication feedback: only the echo is available.
    Obstacle,
    /// Echo plus communication feedback, both usable for fusion.
    PeerUav,
}

impl EncounterClassification {
    pub fn has_feedback(&self) -> bool {
        matches!(self, EncounterClassification::PeerUav)
    }
}

/// A detected target that answers over the link is a peer UAV, otherwise an
/// obstacle. Classification requires a detection.
pub fn classify_detection(echo_detected: bool, feedback_received: bool) -> Result<EncounterClassification> {
    if !echo_detected {
        return Err(ControlError::InvalidInput("classification needs a detected echo".into()));
    }
    Ok(if feedback_received {
        EncounterClassification::PeerUav
    } else {
        EncounterClassification::Obstacle
    })
}
