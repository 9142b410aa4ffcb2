//! Scenario schema: screens, elements, effects, tasks, synonym sets.
//!
//! Scenarios are stored as UTF-8 JSON with stable key order (struct field
//! order for objects, sorted maps elsewhere). `load_scenario` validates every
//! cross-reference and reports the offending location.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::state::initial_state;
use super::EnvError;

/// Element kinds a screen can host.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Button,
    TextField,
    ListItem,
    Toggle,
}

impl ElementKind {
    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            ElementKind::Button => "button",
            ElementKind::TextField => "text_field",
            ElementKind::ListItem => "list_item",
            ElementKind::Toggle => "toggle",
        }
    }
}

/// Writes a named field value when triggered.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetField {
    pub field: String,
    pub value: String,
}

/// What activating an element does to the state. All parts are optional and
/// apply together; an effect with no parts is an explicit no-op.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEffect {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goto: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set_field: Option<SetField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toggle: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toast: Option<String>,
}

impl TransitionEffect {
    #[must_use]
    pub fn goto(target: impl Into<String>) -> Self {
        TransitionEffect { goto: Some(target.into()), ..Default::default() }
    }

    #[must_use]
    pub fn toggle(flag: impl Into<String>) -> Self {
        TransitionEffect { toggle: Some(flag.into()), ..Default::default() }
    }

    #[must_use]
    pub fn toast(message: impl Into<String>) -> Self {
        TransitionEffect { toast: Some(message.into()), ..Default::default() }
    }
}

/// One interactive element on a screen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UiElement {
    pub id: String,
    pub label: String,
    pub kind: ElementKind,
    #[serde(default)]
    pub effect: TransitionEffect,
}

/// An ordered list of elements; the order is what the agent sees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Screen {
    pub id: String,
    pub elements: Vec<UiElement>,
}

/// Required field value, part of a success predicate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldEquals {
    pub field: String,
    pub value: String,
}

/// Required flag value, part of a success predicate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlagSet {
    pub flag: String,
    pub value: bool,
}

/// Declarative task-completion condition; all present parts must hold.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuccessPredicate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen_is: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub field_equals: Vec<FieldEquals>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags_set: Vec<FlagSet>,
}

/// A goal plus its success condition and step budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub id: String,
    pub goal: String,
    pub initial_screen: String,
    pub success: SuccessPredicate,
    pub max_steps: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub input_candidates: Vec<String>,
}

/// A complete simulated app: screens, tasks, and the synonym vocabulary that
/// relabeling perturbations may draw from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default = "default_version")]
    pub version: u32,
    pub screens: Vec<Screen>,
    pub tasks: Vec<Task>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub synonym_sets: Vec<Vec<String>>,
}

fn default_version() -> u32 {
    1
}

impl Scenario {
    /// Looks up a screen by id.
    #[must_use]
    pub fn screen(&self, id: &str) -> Option<&Screen> {
        self.screens.iter().find(|s| s.id == id)
    }

    /// Looks up a task by id.
    #[must_use]
    pub fn task(&self, id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }

    /// The screen `navigate_home` jumps to.
    #[must_use]
    pub fn home_screen_id(&self) -> &str {
        &self.screens[0].id
    }

    /// The synonym set containing `label`, if any.
    #[must_use]
    pub fn synonym_set_of(&self, label: &str) -> Option<&[String]> {
        self.synonym_sets
            .iter()
            .find(|set| set.iter().any(|l| l == label))
            .map(Vec::as_slice)
    }

    /// Checks every structural and referential invariant.
    pub fn validate(&self) -> Result<(), EnvError> {
        let invalid = |what: String| Err(EnvError::Invalid { what });
        if self.name.is_empty() {
            return invalid("scenario name is empty".into());
        }
        if self.screens.is_empty() {
            return invalid(format!("scenario '{}' has no screens", self.name));
        }
        let mut screen_ids = std::collections::BTreeSet::new();
        for screen in &self.screens {
            if !screen_ids.insert(screen.id.as_str()) {
                return invalid(format!("duplicate screen id '{}'", screen.id));
            }
            let mut element_ids = std::collections::BTreeSet::new();
            for el in &screen.elements {
                if !element_ids.insert(el.id.as_str()) {
                    return invalid(format!(
                        "screen '{}' has duplicate element id '{}'",
                        screen.id, el.id
                    ));
                }
            }
        }
        let text_field_ids: std::collections::BTreeSet<&str> = self
            .screens
            .iter()
            .flat_map(|s| &s.elements)
            .filter(|e| e.kind == ElementKind::TextField)
            .map(|e| e.id.as_str())
            .collect();
        for screen in &self.screens {
            for el in &screen.elements {
                if let Some(target) = &el.effect.goto {
                    if self.screen(target).is_none() {
                        return invalid(format!(
                            "screen '{}' element '{}' goto target '{}' does not exist",
                            screen.id, el.id, target
                        ));
                    }
                }
                if let Some(sf) = &el.effect.set_field {
                    if !text_field_ids.contains(sf.field.as_str()) {
                        return invalid(format!(
                            "screen '{}' element '{}' set_field target '{}' is not a text field",
                            screen.id, el.id, sf.field
                        ));
                    }
                }
            }
        }
        if self.tasks.is_empty() {
            return Err(EnvError::EmptyTasks { scenario: self.name.clone() });
        }
        let mut task_ids = std::collections::BTreeSet::new();
        for task in &self.tasks {
            if !task_ids.insert(task.id.as_str()) {
                return invalid(format!("duplicate task id '{}'", task.id));
            }
            if self.screen(&task.initial_screen).is_none() {
                return invalid(format!(
                    "task '{}' initial screen '{}' does not exist",
                    task.id, task.initial_screen
                ));
            }
            if task.max_steps == 0 {
                return invalid(format!("task '{}' has max_steps 0", task.id));
            }
            if let Some(target) = &task.success.screen_is {
                if self.screen(target).is_none() {
                    return invalid(format!(
                        "task '{}' success screen '{}' does not exist",
                        task.id, target
                    ));
                }
            }
            for fe in &task.success.field_equals {
                if !text_field_ids.contains(fe.field.as_str()) {
                    return invalid(format!(
                        "task '{}' success field '{}' is not a text field",
                        task.id, fe.field
                    ));
                }
            }
            let mut seen = std::collections::BTreeSet::new();
            for cand in &task.input_candidates {
                if !seen.insert(cand.as_str()) {
                    return invalid(format!(
                        "task '{}' has duplicate input candidate '{cand}'",
                        task.id
                    ));
                }
            }
            let start = initial_state(self, task)?;
            if super::state::predicate_holds(&task.success, &start) {
                return invalid(format!(
                    "task '{}' is trivially satisfied in its initial state",
                    task.id
                ));
            }
        }
        for (i, set) in self.synonym_sets.iter().enumerate() {
            if set.len() < 2 {
                return invalid(format!("synonym set {i} has fewer than two labels"));
            }
            let mut seen = std::collections::BTreeSet::new();
            for label in set {
                if !seen.insert(label.as_str()) {
                    return invalid(format!("synonym set {i} repeats label '{label}'"));
                }
            }
        }
        Ok(())
    }
}

/// Loads and validates a scenario from a JSON file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, EnvError> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|e| EnvError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    let scenario: Scenario = serde_json::from_str(&raw).map_err(|e| EnvError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    scenario.validate()?;
    Ok(scenario)
}

/// Writes a scenario as pretty JSON with a trailing newline.
pub fn save_scenario(path: impl AsRef<Path>, scenario: &Scenario) -> Result<(), EnvError> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(scenario).map_err(|e| EnvError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| EnvError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}
