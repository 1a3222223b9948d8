//! Dataset design: classes, attributes and their options, and the search
//! queries they expand into.
//!
//! A taxonomy file is TOML:
//!
//! ```toml
//! version = "clothing-1"
//!
//! [[classes]]
//! name = "sweater"
//!
//! [[classes.attributes]]
//! name = "color"
//! options = ["white", "beige"]
//!
//! [[classes.attributes]]
//! name = "material"
//! options = ["cotton", "wool"]
//! ```
//!
//! Attribute order inside a class is the order their options appear in the
//! query, followed by the class name.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::prompt::{Exchange, PromptClient, PromptError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSet {
    pub name: String,
    pub options: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    #[serde(default)]
    pub attributes: Vec<AttributeSet>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomySpec {
    pub version: String,
    #[serde(default)]
    pub classes: Vec<ClassSpec>,
}

/// Identifies one subclass: a class plus one chosen option per attribute.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SubclassKey {
    pub class_index: usize,
    pub option_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TaxonomyError {
    #[error("reading taxonomy: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing taxonomy: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid taxonomy ({} violations): {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Invalid(Vec<Violation>),
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("count range [{min}, {max}] is empty")]
    BadRange { min: usize, max: usize },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("response yielded {} distinct options, need at least {min}", .parsed.len())]
    InsufficientOptions { min: usize, parsed: Vec<String>, exchange: Exchange },
}

impl TaxonomySpec {
    pub fn from_toml_str(text: &str) -> Result<Self, TaxonomyError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Loads and rejects specs with any invariant violation.
    pub fn load_valid(path: &Path) -> Result<Self, TaxonomyError> {
        let spec = Self::load(path)?;
        spec.ensure_valid()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("taxonomy is always representable as TOML")
    }

    pub fn ensure_valid(&self) -> Result<(), TaxonomyError> {
        let violations = validate_taxonomy(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(TaxonomyError::Invalid(violations))
        }
    }

    pub fn class_names(&self) -> Vec<&str> {
        self.classes.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.name == name)
    }

    /// Number of subclasses: the sum over classes of the product of option counts.
    pub fn subclass_count(&self) -> usize {
        self.classes
            .iter()
            .map(|c| c.attributes.iter().map(|a| a.options.len()).product::<usize>())
            .sum()
    }
}

/// Lists every invariant violation; an empty list means the spec is valid.
pub fn validate_taxonomy(spec: &TaxonomySpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |path: String, message: &str| out.push(Violation { path, message: message.to_string() });

    if spec.classes.is_empty() {
        push("classes".into(), "class list is empty");
    }
    let mut seen_classes = HashSet::new();
    for (ci, class) in spec.classes.iter().enumerate() {
        let cpath = format!("classes[{ci}]");
        if class.name.trim().is_empty() {
            push(format!("{cpath}.name"), "class name is empty");
        } else if !seen_classes.insert(class.name.as_str()) {
            push(format!("{cpath}.name"), &format!("duplicate class name {:?}", class.name));
        }
        if class.attributes.is_empty() {
            push(format!("{cpath}.attributes"), "class has no attributes");
        }
        let mut seen_attrs = HashSet::new();
        for (ai, attr) in class.attributes.iter().enumerate() {
            let apath = format!("{cpath}.attributes[{ai}]");
            if attr.name.trim().is_empty() {
                push(format!("{apath}.name"), "attribute name is empty");
            } else if !seen_attrs.insert(attr.name.as_str()) {
                push(format!("{apath}.name"), &format!("duplicate attribute name {:?}", attr.name));
            }
            if attr.options.is_empty() {
                push(format!("{apath}.options"), &format!("attribute {:?} has no options", attr.name));
            }
            let mut seen_opts = HashSet::new();
            for (oi, opt) in attr.options.iter().enumerate() {
                if opt.trim().is_empty() {
                    push(format!("{apath}.options[{oi}]"), &format!("empty option in attribute {:?}", attr.name));
                } else if !seen_opts.insert(opt.as_str()) {
                    push(
                        format!("{apath}.options[{oi}]"),
                        &format!("duplicate option {opt:?} in attribute {:?}", attr.name),
                    );
                }
            }
        }
    }
    out
}

/// Expands the spec into one search query per subclass.
///
/// Output is ordered lexicographically by `(class_index, option_indices)`;
/// each query is the chosen options in declared attribute order followed by
/// the class name, single-space separated.
pub fn generate_queries(spec: &TaxonomySpec) -> Result<Vec<(SubclassKey, String)>, TaxonomyError> {
    spec.ensure_valid()?;
    let mut out = Vec::with_capacity(spec.subclass_count());
    for (class_index, class) in spec.classes.iter().enumerate() {
        let radices: Vec<usize> = class.attributes.iter().map(|a| a.options.len()).collect();
        let mut idx = vec![0usize; radices.len()];
        'subclasses: loop {
            let mut query = String::new();
            for (attr, &oi) in class.attributes.iter().zip(&idx) {
                query.push_str(&attr.options[oi]);
                query.push(' ');
            }
            query.push_str(&class.name);
            out.push((SubclassKey { class_index, option_indices: idx.clone() }, query));

            // odometer step, last attribute fastest
            for pos in (0..radices.len()).rev() {
                idx[pos] += 1;
                if idx[pos] < radices[pos] {
                    continue 'subclasses;
                }
                idx[pos] = 0;
            }
            break;
        }
    }
    Ok(out)
}

/// Canonical option form: trimmed, internal whitespace collapsed, lowercased.
pub fn normalize_option(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Prompt used to ask a language model for attribute options.
pub fn expansion_prompt(class: &str, attribute: &str, min: usize, max: usize) -> String {
    format!("Show me {min}-{max} ways to describe {attribute} of {class}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expansion {
    pub options: Vec<String>,
    pub exchange: Exchange,
}

/// Asks `client` for options of `attribute` under `class`, then dedups and
/// normalizes the reply. Result length is clamped to `count_range`.
pub fn expand_attributes(
    spec: &TaxonomySpec,
    class: &str,
    attribute: &str,
    count_range: (usize, usize),
    client: &dyn PromptClient,
) -> Result<Expansion, TaxonomyError> {
    let (min, max) = count_range;
    if min > max || max == 0 {
        return Err(TaxonomyError::BadRange { min, max });
    }
    if spec.class_index(class).is_none() {
        return Err(TaxonomyError::UnknownClass(class.to_string()));
    }
    let prompt = expansion_prompt(class, attribute, min, max);
    let response = client.complete(&prompt)?;
    log::debug!("expansion prompt {prompt:?} -> {} bytes", response.len());
    let exchange = Exchange { prompt, response };

    let mut seen = HashSet::new();
    let mut options = Vec::new();
    for line in exchange.response.lines() {
        let opt = normalize_option(strip_list_marker(line));
        if !opt.is_empty() && seen.insert(opt.clone()) {
            options.push(opt);
        }
    }
    if options.len() < min {
        return Err(TaxonomyError::InsufficientOptions { min, parsed: options, exchange });
    }
    options.truncate(max);
    Ok(Expansion { options, exchange })
}

/// Strips "1.", "2)", "-", "*" and bullet prefixes commonly found in model replies.
fn strip_list_marker(line: &str) -> &str {
    let s = line.trim_start();
    let s = s.trim_start_matches(['-', '*', '•']);
    let digits = s.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &s[digits..];
        if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            return r;
        }
    }
    s
}
