//! Prompt templates: external text files with `{{name}}` placeholders.
//!
//! Templates load from a directory (one `<id>.txt` per template) and render
//! by exact placeholder substitution. A placeholder without a binding is an
//! error; unused bindings are fine.

use super::AdapterError;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Default)]
pub struct TemplateStore {
    templates: BTreeMap<String, String>,
}

impl TemplateStore {
    /// Load every `*.txt` file of `dir`; the file stem is the template id.
    pub fn load(dir: &Path) -> Result<Self, AdapterError> {
        let mut templates = BTreeMap::new();
        let entries = std::fs::read_dir(dir).map_err(|e| {
            AdapterError::InvalidInput(format!(
                "cannot read templates dir {}: {e}",
                dir.display()
            ))
        })?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        paths.sort();
        for path in paths {
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            let body = std::fs::read_to_string(&path).map_err(|e| {
                AdapterError::InvalidInput(format!("cannot read {}: {e}", path.display()))
            })?;
            templates.insert(id, body);
        }
        Ok(Self { templates })
    }

    pub fn from_entries(entries: &[(&str, &str)]) -> Self {
        Self {
            templates: entries
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.templates.contains_key(id)
    }

    pub fn render(
        &self,
        id: &str,
        bindings: &BTreeMap<String, String>,
    ) -> Result<String, AdapterError> {
        let body = self
            .templates
            .get(id)
            .ok_or_else(|| AdapterError::TemplateNotFound(id.to_string()))?;
        let mut out = String::with_capacity(body.len());
        let mut rest = body.as_str();
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            let Some(end) = after.find("}}") else {
                out.push_str(&rest[start..]);
                rest = "";
                break;
            };
            let name = after[..end].trim();
            let value = bindings.get(name).ok_or_else(|| AdapterError::MissingPlaceholder {
                template: id.to_string(),
                placeholder: name.to_string(),
            })?;
            out.push_str(value);
            rest = &after[end + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}
