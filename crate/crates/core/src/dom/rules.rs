//! Declarative extraction rules.
//!
//! One rule per line: `name | step > step > ... | one|many | text|html|attr:NAME`.
//! A step is `tag`, `tag[attr=value]...`, `[attr=value]`, `*` or `.` (the
//! context node itself, only as first step), optionally followed by
//! `:nth(k)` (1-based, counted per context node). `>` descends to any
//! depth, not only to direct children. `class` compares against each
//! whitespace-separated class token. Lines starting with `#` are comments.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

use super::{collapse_whitespace, DomTree, NodeId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuleError {
    #[error("rules line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("rule {rule} expects one node but matched {matches}")]
    MultiplicityViolation { rule: String, matches: usize },
    #[error("no rule named {0}")]
    UnknownRule(String),
    #[error("cannot read rules file: {0}")]
    Io(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Multiplicity {
    One,
    Many,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Capture {
    /// Text content, whitespace collapsed.
    Text,
    /// Inner markup, serialized.
    Html,
    Attr(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Step {
    /// `.`: the context node itself.
    pub context: bool,
    /// `None` matches any element.
    pub tag: Option<String>,
    pub attrs: Vec<(String, String)>,
    pub nth: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtractionRule {
    pub name: String,
    pub steps: Vec<Step>,
    pub multiplicity: Multiplicity,
    pub capture: Capture,
}

impl Step {
    fn matches(&self, dom: &DomTree, node: NodeId) -> bool {
        let Some(tag) = dom.tag(node) else {
            return false;
        };
        if self.tag.as_deref().is_some_and(|t| t != tag) {
            return false;
        }
        self.attrs.iter().all(|(k, v)| match dom.attr(node, k) {
            Some(actual) if k == "class" => actual.split_whitespace().any(|c| c == v),
            Some(actual) => actual == v,
            None => false,
        })
    }

    fn parse(text: &str) -> Result<Step, String> {
        let mut s = text.trim();
        let mut step = Step::default();
        if let Some(pos) = s.find(":nth(") {
            let arg = s[pos + 5..]
                .strip_suffix(')')
                .ok_or_else(|| format!("unterminated :nth in {text:?}"))?;
            let k: usize = arg
                .trim()
                .parse()
                .map_err(|_| format!("bad :nth index in {text:?}"))?;
            if k == 0 {
                return Err(":nth is 1-based".into());
            }
            step.nth = Some(k);
            s = &s[..pos];
        }
        if s == "." {
            step.context = true;
            return Ok(step);
        }
        let (tag, mut rest) = match s.find('[') {
            Some(i) => (&s[..i], &s[i..]),
            None => (s, ""),
        };
        match tag {
            "" if rest.is_empty() => return Err("empty step".into()),
            "" | "*" => {}
            t if t.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') => {
                step.tag = Some(t.to_ascii_lowercase())
            }
            t => return Err(format!("bad tag name {t:?}")),
        }
        while !rest.is_empty() {
            let close = rest
                .find(']')
                .ok_or_else(|| format!("unterminated [ in {text:?}"))?;
            let body = rest
                .strip_prefix('[')
                .map(|b| &b[..close - 1])
                .ok_or_else(|| format!("unexpected text in {text:?}"))?;
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| format!("expected attr=value in {text:?}"))?;
            let v = v.trim().trim_matches('"');
            step.attrs.push((k.trim().to_string(), v.to_string()));
            rest = &rest[close + 1..];
        }
        Ok(step)
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.context {
            f.write_str(".")?;
        } else {
            match &self.tag {
                Some(t) => f.write_str(t)?,
                None if self.attrs.is_empty() => f.write_str("*")?,
                None => {}
            }
            for (k, v) in &self.attrs {
                write!(f, "[{k}={v}]")?;
            }
        }
        if let Some(k) = self.nth {
            write!(f, ":nth({k})")?;
        }
        Ok(())
    }
}

impl fmt::Display for ExtractionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let steps: Vec<String> = self.steps.iter().map(Step::to_string).collect();
        let mult = match self.multiplicity {
            Multiplicity::One => "one",
            Multiplicity::Many => "many",
        };
        let capture = match &self.capture {
            Capture::Text => "text".to_string(),
            Capture::Html => "html".to_string(),
            Capture::Attr(a) => format!("attr:{a}"),
        };
        write!(f, "{} | {} | {mult} | {capture}", self.name, steps.join(" > "))
    }
}

impl ExtractionRule {
    pub fn parse(line: &str) -> Result<ExtractionRule, String> {
        let parts: Vec<&str> = line.split('|').map(str::trim).collect();
        let [name, steps, mult, capture] = parts[..] else {
            return Err(format!("expected 4 `|`-separated fields, found {}", parts.len()));
        };
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(format!("bad rule name {name:?}"));
        }
        let steps = steps
            .split('>')
            .map(Step::parse)
            .collect::<Result<Vec<_>, _>>()?;
        if steps.iter().skip(1).any(|s| s.context) {
            return Err("`.` is only allowed as the first step".into());
        }
        let multiplicity = match mult {
            "one" => Multiplicity::One,
            "many" => Multiplicity::Many,
            m => return Err(format!("multiplicity must be one or many, not {m:?}")),
        };
        let capture = match capture {
            "text" => Capture::Text,
            "html" => Capture::Html,
            c => match c.strip_prefix("attr:") {
                Some(a) if !a.is_empty() => Capture::Attr(a.to_string()),
                _ => return Err(format!("bad capture {c:?}")),
            },
        };
        Ok(ExtractionRule {
            name: name.to_string(),
            steps,
            multiplicity,
            capture,
        })
    }

    /// Nodes matched from `ctx`, in document order, before capture and
    /// without the multiplicity check.
    pub fn select(&self, dom: &DomTree, ctx: NodeId) -> Vec<NodeId> {
        let mut current = vec![ctx];
        for (i, step) in self.steps.iter().enumerate() {
            if step.context && i == 0 {
                if let Some(k) = step.nth {
                    current.truncate(usize::from(k == 1));
                }
                continue;
            }
            let mut next = Vec::new();
            for &c in &current {
                let found = dom.descendants(c).filter(|&n| step.matches(dom, n));
                match step.nth {
                    Some(k) => next.extend(found.skip(k - 1).take(1)),
                    None => next.extend(found),
                }
            }
            // Ids are assigned in document order, so sorting restores it.
            next.sort_unstable();
            next.dedup();
            current = next;
        }
        current
    }

    fn capture_node(&self, dom: &DomTree, node: NodeId) -> Option<String> {
        match &self.capture {
            Capture::Text => Some(collapse_whitespace(&dom.text(node))),
            Capture::Html => Some(dom.inner_html(node).trim().to_string()),
            Capture::Attr(a) => dom.attr(node, a).map(str::to_string),
        }
    }
}

pub fn apply_rule(dom: &DomTree, rule: &ExtractionRule) -> Result<Vec<String>, RuleError> {
    apply_rule_at(dom, dom.root(), rule)
}

/// Evaluates `rule` relative to `ctx` instead of the document root.
pub fn apply_rule_at(dom: &DomTree, ctx: NodeId, rule: &ExtractionRule) -> Result<Vec<String>, RuleError> {
    let nodes = rule.select(dom, ctx);
    if rule.multiplicity == Multiplicity::One && nodes.len() > 1 {
        return Err(RuleError::MultiplicityViolation {
            rule: rule.name.clone(),
            matches: nodes.len(),
        });
    }
    Ok(nodes
        .into_iter()
        .filter_map(|n| rule.capture_node(dom, n))
        .collect())
}

const DEFAULT_RULES: &str = include_str!("../../rules/default.rules");

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleSet {
    rules: Vec<ExtractionRule>,
    by_name: HashMap<String, usize>,
}

impl RuleSet {
    pub fn parse(text: &str) -> Result<RuleSet, RuleError> {
        let mut rules = Vec::new();
        let mut by_name = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let rule = ExtractionRule::parse(line).map_err(|message| RuleError::Parse {
                line: idx + 1,
                message,
            })?;
            if by_name.insert(rule.name.clone(), rules.len()).is_some() {
                return Err(RuleError::Parse {
                    line: idx + 1,
                    message: format!("duplicate rule {}", rule.name),
                });
            }
            rules.push(rule);
        }
        Ok(RuleSet { rules, by_name })
    }

    pub fn load(path: &Path) -> Result<RuleSet, RuleError> {
        let text = std::fs::read_to_string(path).map_err(|e| RuleError::Io(format!("{}: {e}", path.display())))?;
        RuleSet::parse(&text)
    }

    pub fn get(&self, name: &str) -> Result<&ExtractionRule, RuleError> {
        self.by_name
            .get(name)
            .map(|&i| &self.rules[i])
            .ok_or_else(|| RuleError::UnknownRule(name.to_string()))
    }

    pub fn rules(&self) -> &[ExtractionRule] {
        &self.rules
    }

    pub fn default_text() -> &'static str {
        DEFAULT_RULES
    }
}

impl Default for RuleSet {
    /// The rules for the fixture's page templates.
    fn default() -> Self {
        RuleSet::parse(DEFAULT_RULES).expect("built-in rules parse")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::parse_dom;

    fn rule(line: &str) -> ExtractionRule {
        ExtractionRule::parse(line).unwrap()
    }

    const PAGE: &[u8] = br#"<html><body>
        <ul id="friend-list">
          <li><a class="friend-link x" href="/profile/u1">u1</a></li>
          <li><a class="friend-link" href="/profile/u2">u2</a></li>
          <li><a class="other" href="/elsewhere">no</a></li>
        </ul>
        <section id="friend-count"><span class="value"> 501 </span></section>
        <a id="next" href="/p?page=2">more</a>
    </body></html>"#;

    #[test]
    fn many_rule_in_document_order() {
        let dom = parse_dom(PAGE);
        let r = rule("friends | ul[id=friend-list] > a[class=friend-link] | many | attr:href");
        assert_eq!(apply_rule(&dom, &r).unwrap(), ["/profile/u1", "/profile/u2"]);
    }

    #[test]
    fn one_rule_captures_text() {
        let dom = parse_dom(PAGE);
        let r = rule("count | section[id=friend-count] > span[class=value] | one | text");
        assert_eq!(apply_rule(&dom, &r).unwrap(), ["501"]);
    }

    #[test]
    fn no_match_is_empty() {
        let dom = parse_dom(PAGE);
        let r = rule("none | table > td | many | text");
        assert!(apply_rule(&dom, &r).unwrap().is_empty());
        let r = rule("none | table | one | text");
        assert!(apply_rule(&dom, &r).unwrap().is_empty());
    }

    #[test]
    fn one_rule_with_two_matches_violates() {
        let dom = parse_dom(PAGE);
        let r = rule("links | a[class=friend-link] | one | text");
        assert_eq!(
            apply_rule(&dom, &r),
            Err(RuleError::MultiplicityViolation {
                rule: "links".into(),
                matches: 2
            })
        );
    }

    #[test]
    fn nth_and_context_steps() {
        let dom = parse_dom(PAGE);
        let r = rule("second | ul > li:nth(2) > a | one | text");
        assert_eq!(apply_rule(&dom, &r).unwrap(), ["u2"]);
        let ul = rule("ul | ul | one | text").select(&dom, dom.root())[0];
        let own = rule("own | . | one | attr:id");
        assert_eq!(apply_rule_at(&dom, ul, &own).unwrap(), ["friend-list"]);
    }

    #[test]
    fn nested_matches_are_not_duplicated() {
        let dom = parse_dom(b"<div><div><p>x</p></div></div>");
        let r = rule("p | div > p | many | text");
        assert_eq!(apply_rule(&dom, &r).unwrap(), ["x"]);
    }

    #[test]
    fn parse_errors() {
        for bad in [
            "x | | one | text",
            "x | div | some | text",
            "x | div | one | attr:",
            "x | div[id | one | text",
            "x | div > . | one | text",
            "x | div:nth(0) | one | text",
            "x y | div | one | text",
            "x | div | one",
        ] {
            assert!(ExtractionRule::parse(bad).is_err(), "{bad}");
        }
        let dup = "a | div | one | text\na | p | one | text\n";
        assert!(matches!(RuleSet::parse(dup), Err(RuleError::Parse { line: 2, .. })));
    }

    #[test]
    fn display_round_trips() {
        for r in RuleSet::default().rules() {
            assert_eq!(&ExtractionRule::parse(&r.to_string()).unwrap(), r);
        }
    }
}
