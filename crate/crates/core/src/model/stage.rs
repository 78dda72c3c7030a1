//! Which parameter groups are trainable in each finetuning stage.
//!
//! Stage 1 trains only the connector; stage 2 trains only the language
//! model adapter. Everything else stays frozen.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    VisionEncoder,
    Connector,
    LanguageModel,
    Adapter,
}

impl Component {
    pub const ALL: [Component; 4] = [
        Component::VisionEncoder,
        Component::Connector,
        Component::LanguageModel,
        Component::Adapter,
    ];
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Component::VisionEncoder => "vision_encoder",
            Component::Connector => "connector",
            Component::LanguageModel => "language_model",
            Component::Adapter => "adapter",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainingStage {
    /// Align visual tokens with the language space.
    ConnectorAlignment,
    /// Instruction tuning through the low-rank adapter.
    AdapterTuning,
}

impl TrainingStage {
    pub fn number(self) -> u8 {
        match self {
            TrainingStage::ConnectorAlignment => 1,
            TrainingStage::AdapterTuning => 2,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(TrainingStage::ConnectorAlignment),
            2 => Ok(TrainingStage::AdapterTuning),
            other => Err(Error::invalid(format!("unknown training stage {other}"))),
        }
    }

    fn trainable(self) -> Component {
        match self {
            TrainingStage::ConnectorAlignment => Component::Connector,
            TrainingStage::AdapterTuning => Component::Adapter,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreezeMask {
    pub trainable: BTreeSet<Component>,
}

impl FreezeMask {
    pub fn all_frozen() -> Self {
        Self::default()
    }

    pub fn for_stage(stage: TrainingStage) -> Self {
        Self {
            trainable: BTreeSet::from([stage.trainable()]),
        }
    }

    pub fn with_trainable(mut self, component: Component) -> Self {
        self.trainable.insert(component);
        self
    }

    pub fn is_trainable(&self, component: Component) -> bool {
        self.trainable.contains(&component)
    }

    /// Checks that exactly the stage's component is trainable.
    pub fn validate(&self, stage: TrainingStage) -> Result<()> {
        let expected = stage.trainable();
        let mut problems = Vec::new();
        if !self.is_trainable(expected) {
            problems.push(format!("{expected} must be trainable"));
        }
        for c in Component::ALL
            .iter()
            .filter(|c| **c != expected && self.is_trainable(**c))
        {
            problems.push(format!("{c} must be frozen"));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "stage {} freeze mask: {}",
                stage.number(),
                problems.join(", ")
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_masks_validate() {
        for stage in [TrainingStage::ConnectorAlignment, TrainingStage::AdapterTuning] {
            FreezeMask::for_stage(stage).validate(stage).unwrap();
        }
    }

    #[test]
    fn wrong_masks_rejected() {
        let s1 = TrainingStage::ConnectorAlignment;
        let s2 = TrainingStage::AdapterTuning;
        assert!(FreezeMask::all_frozen().validate(s1).is_err());
        assert!(FreezeMask::for_stage(s1).validate(s2).is_err());
        let both = FreezeMask::for_stage(s1).with_trainable(Component::VisionEncoder);
        let err = both.validate(s1).unwrap_err().to_string();
        assert!(err.contains("vision_encoder must be frozen"), "{err}");
        assert!(FreezeMask::for_stage(s2)
            .with_trainable(Component::LanguageModel)
            .validate(s2)
            .is_err());
    }

    #[test]
    fn stage_numbers() {
        assert_eq!(
            TrainingStage::from_number(1).unwrap(),
            TrainingStage::ConnectorAlignment
        );
        assert_eq!(TrainingStage::AdapterTuning.number(), 2);
        assert!(TrainingStage::from_number(3).is_err());
    }
}
