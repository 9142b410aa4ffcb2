//! UI actions and their two serializations: a canonical injective string
//! (used for histories, tie-breaking, and cache keys) and a JSON wire form
//! (used by the CLI and the remote world-model protocol).

use serde::{Deserialize, Serialize};

use super::EnvError;

/// Everything an agent can in principle emit. Only a subset is ever
/// enumerated on a screen; the rest parse from the wire and are absorbed as
/// no-ops by the simulator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionKind {
    Click,
    LongPress,
    InputText,
    Scroll,
    NavigateBack,
    NavigateHome,
    OpenApp,
    StatusComplete,
    Answer,
}

impl ActionKind {
    /// Stable lowercase name, used in features and canonical strings.
    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Click => "click",
            ActionKind::LongPress => "long_press",
            ActionKind::InputText => "input_text",
            ActionKind::Scroll => "scroll",
            ActionKind::NavigateBack => "navigate_back",
            ActionKind::NavigateHome => "navigate_home",
            ActionKind::OpenApp => "open_app",
            ActionKind::StatusComplete => "status_complete",
            ActionKind::Answer => "answer",
        }
    }
}

/// A single agent action. `index` refers to a position in the current
/// observation's listing; `text` carries typed text, a scroll direction, an
/// app name, or an answer, depending on the kind.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    pub kind: ActionKind,
    pub index: Option<usize>,
    pub text: Option<String>,
}

impl Action {
    #[must_use]
    pub fn click(index: usize) -> Self {
        Action { kind: ActionKind::Click, index: Some(index), text: None }
    }

    #[must_use]
    pub fn long_press(index: usize) -> Self {
        Action { kind: ActionKind::LongPress, index: Some(index), text: None }
    }

    #[must_use]
    pub fn input_text(index: usize, text: impl Into<String>) -> Self {
        Action { kind: ActionKind::InputText, index: Some(index), text: Some(text.into()) }
    }

    #[must_use]
    pub fn navigate_back() -> Self {
        Action { kind: ActionKind::NavigateBack, index: None, text: None }
    }

    #[must_use]
    pub fn navigate_home() -> Self {
        Action { kind: ActionKind::NavigateHome, index: None, text: None }
    }

    #[must_use]
    pub fn status_complete() -> Self {
        Action { kind: ActionKind::StatusComplete, index: None, text: None }
    }

    /// Canonical injective string form. Distinct actions always map to
    /// distinct strings: the kind prefix, the bracketed index, and the
    /// JSON-escaped text each occupy unambiguous positions.
    #[must_use]
    pub fn canonical(&self) -> String {
        let mut s = String::from(self.kind.name());
        if let Some(i) = self.index {
            s.push('[');
            s.push_str(&i.to_string());
            s.push(']');
        }
        if let Some(t) = &self.text {
            s.push(':');
            s.push_str(&serde_json::to_string(t).expect("string serializes"));
        }
        s
    }

    /// Checks the kind/field shape produced by parsing or construction.
    pub fn validate_shape(&self) -> Result<(), EnvError> {
        let need_index = matches!(
            self.kind,
            ActionKind::Click | ActionKind::LongPress | ActionKind::InputText
        );
        if need_index && self.index.is_none() {
            return Err(EnvError::InvalidAction {
                msg: format!("{} requires an index", self.kind.name()),
            });
        }
        let need_text = matches!(
            self.kind,
            ActionKind::InputText | ActionKind::OpenApp | ActionKind::Answer
        );
        if need_text && self.text.is_none() {
            return Err(EnvError::InvalidAction {
                msg: format!("{} requires text", self.kind.name()),
            });
        }
        Ok(())
    }
}

/// JSON wire form, mirroring the action grammar used by UI-agent prompts:
/// `{"action_type": "click", "index": 3}`,
/// `{"action_type": "input_text", "text": "foo", "index": 2}`,
/// `{"action_type": "status", "goal_status": "complete"}`, and so on.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireAction {
    action_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    direction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    app_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    goal_status: Option<String>,
}

impl Serialize for Action {
    fn serialize<S>(&self, serializer: S) -> Result<S::Ok, S::Error>
    where
        S: serde::Serializer,
    {
        self.wire().serialize(serializer)
    }
}

impl Action {
    fn wire(&self) -> WireAction {
        let mut w = WireAction {
            action_type: self.kind.name().to_string(),
            index: self.index,
            text: None,
            direction: None,
            app_name: None,
            goal_status: None,
        };
        match self.kind {
            ActionKind::Scroll => w.direction = self.text.clone(),
            ActionKind::OpenApp => w.app_name = self.text.clone(),
            ActionKind::StatusComplete => {
                w.action_type = "status".to_string();
                w.goal_status = Some("complete".to_string());
            }
            _ => w.text = self.text.clone(),
        }
        w
    }

    fn from_wire(w: WireAction) -> Result<Self, EnvError> {
        let bad = |msg: String| EnvError::InvalidAction { msg };
        let kind = match w.action_type.as_str() {
            "click" => ActionKind::Click,
            "long_press" => ActionKind::LongPress,
            "input_text" => ActionKind::InputText,
            "scroll" => ActionKind::Scroll,
            "navigate_back" => ActionKind::NavigateBack,
            "navigate_home" => ActionKind::NavigateHome,
            "open_app" => ActionKind::OpenApp,
            "answer" => ActionKind::Answer,
            "status" | "status_complete" => {
                if let Some(gs) = &w.goal_status {
                    if gs != "complete" {
                        return Err(bad(format!("unsupported goal_status '{gs}'")));
                    }
                }
                ActionKind::StatusComplete
            }
            other => return Err(bad(format!("unknown action_type '{other}'"))),
        };
        let text = match kind {
            ActionKind::Scroll => w.direction,
            ActionKind::OpenApp => w.app_name,
            ActionKind::StatusComplete => None,
            _ => w.text,
        };
        let action = Action { kind, index: w.index, text };
        action.validate_shape()?;
        Ok(action)
    }

    /// Parses the JSON wire form.
    pub fn from_json(s: &str) -> Result<Self, EnvError> {
        let w: WireAction = serde_json::from_str(s).map_err(|e| EnvError::InvalidAction {
            msg: format!("malformed action json: {e}"),
        })?;
        Self::from_wire(w)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let w = WireAction::deserialize(deserializer)?;
        Action::from_wire(w).map_err(serde::de::Error::custom)
    }
}
