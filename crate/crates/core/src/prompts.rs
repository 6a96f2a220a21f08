//! Versioned prompt templates for the four agent roles.
//!
//! Templates live in `prompts/*.txt` and use `{{name}}` placeholders, filled
//! in a single pass so substituted text is never re-expanded.

use alloc::string::String;

use crate::backend::ResponseSchema;

/// Bumped whenever any template text changes.
pub const PROMPT_VERSION: &str = "v1";

pub const EXTRACT_ROLE: &str = include_str!("../prompts/extract_role.txt");
pub const EXTRACT_USER: &str = include_str!("../prompts/extract_user.txt");
pub const VERIFY_ROLE: &str = include_str!("../prompts/verify_role.txt");
pub const VERIFY_USER: &str = include_str!("../prompts/verify_user.txt");
pub const RESOURCE_ROLE: &str = include_str!("../prompts/resource_role.txt");
pub const RESOURCE_USER: &str = include_str!("../prompts/resource_user.txt");
pub const PLAN_ROLE: &str = include_str!("../prompts/plan_role.txt");
pub const PLAN_USER: &str = include_str!("../prompts/plan_user.txt");
const FORMAT_REMINDER: &str = include_str!("../prompts/format_reminder.txt");

/// Fills `{{key}}` placeholders from `vars`. Unknown placeholders are left
/// as they are.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) => {
                let key = &after[..close];
                match vars.iter().find(|(k, _)| *k == key) {
                    Some((_, v)) => out.push_str(v),
                    None => {
                        out.push_str("{{");
                        out.push_str(key);
                        out.push_str("}}");
                    }
                }
                rest = &after[close + 2..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    let trimmed = out.trim_end().len();
    out.truncate(trimmed);
    out
}

fn schema_shape(schema: ResponseSchema) -> &'static str {
    match schema {
        ResponseSchema::TermList => r#"[{"term": "...", "source": "name:start-end", "applicable_to": ["..."]}]"#,
        ResponseSchema::Verification => {
            r#"{"verification": "Supported" | "Contradicted" | "Unverifiable", "justification": "..."}"#
        }
        ResponseSchema::Plan => r#"{"possible_accountability_checks": ["...", "..."]}"#,
        ResponseSchema::SourceSpan => r#"{"source": "name:start-end"} or {"source": null}"#,
    }
}

/// `user_prompt` followed by a reminder of the expected output shape.
pub fn with_format_reminder(user_prompt: &str, schema: ResponseSchema) -> String {
    let mut s = String::from(user_prompt);
    s.push('\n');
    s.push_str(&render(FORMAT_REMINDER, &[("shape", schema_shape(schema))]));
    s
}
