//! The closed subtask vocabulary.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A subtask the planner and the tool registry understand.
///
/// The first 24 variants form the planner-facing vocabulary, in the order the
/// planner prompt lists them. [`SubtaskKind::TextStyleDetection`] is an
/// auxiliary kind: tools may declare it in the model description table (it
/// produces font style labels other tools consume) but subtask trees may not
/// request it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SubtaskKind {
    ObjectDetection,
    ObjectSegmentation,
    ObjectAddition,
    ObjectRemoval,
    BackgroundRemoval,
    LandmarkDetection,
    ObjectReplacement,
    ImageUpscaling,
    ImageCaptioning,
    ChangingScenery,
    ObjectRecoloration,
    Outpainting,
    DepthEstimation,
    ImageDeblurring,
    TextExtraction,
    TextReplacement,
    TextRemoval,
    TextAddition,
    TextRedaction,
    QuestionAnsweringOnText,
    KeywordHighlighting,
    SentimentAnalysis,
    CaptionConsistencyCheck,
    TextDetection,
    TextStyleDetection,
}

impl SubtaskKind {
    /// The 24 planner-facing subtasks.
    pub const PLANNER: [SubtaskKind; 24] = [
        SubtaskKind::ObjectDetection,
        SubtaskKind::ObjectSegmentation,
        SubtaskKind::ObjectAddition,
        SubtaskKind::ObjectRemoval,
        SubtaskKind::BackgroundRemoval,
        SubtaskKind::LandmarkDetection,
        SubtaskKind::ObjectReplacement,
        SubtaskKind::ImageUpscaling,
        SubtaskKind::ImageCaptioning,
        SubtaskKind::ChangingScenery,
        SubtaskKind::ObjectRecoloration,
        SubtaskKind::Outpainting,
        SubtaskKind::DepthEstimation,
        SubtaskKind::ImageDeblurring,
        SubtaskKind::TextExtraction,
        SubtaskKind::TextReplacement,
        SubtaskKind::TextRemoval,
        SubtaskKind::TextAddition,
        SubtaskKind::TextRedaction,
        SubtaskKind::QuestionAnsweringOnText,
        SubtaskKind::KeywordHighlighting,
        SubtaskKind::SentimentAnalysis,
        SubtaskKind::CaptionConsistencyCheck,
        SubtaskKind::TextDetection,
    ];

    pub const AUXILIARY: [SubtaskKind; 1] = [SubtaskKind::TextStyleDetection];

    pub fn name(self) -> &'static str {
        use SubtaskKind::*;
        match self {
            ObjectDetection => "Object Detection",
            ObjectSegmentation => "Object Segmentation",
            ObjectAddition => "Object Addition",
            ObjectRemoval => "Object Removal",
            BackgroundRemoval => "Background Removal",
            LandmarkDetection => "Landmark Detection",
            ObjectReplacement => "Object Replacement",
            ImageUpscaling => "Image Upscaling",
            ImageCaptioning => "Image Captioning",
            ChangingScenery => "Changing Scenery",
            ObjectRecoloration => "Object Recoloration",
            Outpainting => "Outpainting",
            DepthEstimation => "Depth Estimation",
            ImageDeblurring => "Image Deblurring",
            TextExtraction => "Text Extraction",
            TextReplacement => "Text Replacement",
            TextRemoval => "Text Removal",
            TextAddition => "Text Addition",
            TextRedaction => "Text Redaction",
            QuestionAnsweringOnText => "Question Answering Based on Text",
            KeywordHighlighting => "Keyword Highlighting",
            SentimentAnalysis => "Sentiment Analysis",
            CaptionConsistencyCheck => "Caption Consistency Check",
            TextDetection => "Text Detection",
            TextStyleDetection => "Text Style Detection",
        }
    }

    pub fn is_planner_facing(self) -> bool {
        self != SubtaskKind::TextStyleDetection
    }

    /// Every kind the registry accepts, planner-facing first.
    pub fn all() -> impl Iterator<Item = SubtaskKind> {
        Self::PLANNER.into_iter().chain(Self::AUXILIARY)
    }

    /// Case-insensitive lookup with whitespace collapsed.
    pub fn from_name(name: &str) -> Option<SubtaskKind> {
        let wanted = fold(name);
        Self::all().find(|k| fold(k.name()) == wanted)
    }
}

fn fold(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl fmt::Display for SubtaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown subtask {0:?}")]
pub struct UnknownSubtask(pub String);

impl FromStr for SubtaskKind {
    type Err = UnknownSubtask;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SubtaskKind::from_name(s).ok_or_else(|| UnknownSubtask(s.trim().to_string()))
    }
}

impl Serialize for SubtaskKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for SubtaskKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
