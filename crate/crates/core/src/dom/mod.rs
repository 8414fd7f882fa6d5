//! HTML to DOM tree, declarative extraction rules, and the page extractors.
//!
//! Tokenising and tree construction follow the HTML parsing algorithm
//! (via `html5ever` through `scraper`), so malformed markup is recovered the
//! way a browser would. The result is copied into a plain arena [`DomTree`]
//! that the rule engine walks.

pub mod extract;
pub mod rules;

use scraper::node::Node;
use scraper::Html;

pub use rules::{apply_rule, apply_rule_at, Capture, ExtractionRule, Multiplicity, RuleError, RuleSet, Step};

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Document,
    Element {
        tag: String,
        attrs: Vec<(String, String)>,
    },
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomNode {
    pub kind: NodeKind,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

/// Arena tree; node 0 is the document root and nodes are stored in
/// document (pre-)order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomTree {
    nodes: Vec<DomNode>,
}

const VOID_ELEMENTS: [&str; 14] = [
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];

/// Parses a document. Never fails: invalid UTF-8 is replaced and malformed
/// markup is recovered; empty input yields a bare document.
pub fn parse_dom(html: &[u8]) -> DomTree {
    let text = String::from_utf8_lossy(html);
    if text.trim().is_empty() {
        return DomTree::empty();
    }
    DomTree::from_html(&Html::parse_document(&text))
}

/// Parses a fragment (no implied `html`/`head`/`body` beyond the wrapper).
pub fn parse_fragment(html: &str) -> DomTree {
    DomTree::from_html(&Html::parse_fragment(html))
}

/// Text content of a markup fragment: tags removed, entities decoded,
/// whitespace collapsed.
pub fn strip_markup(raw: &str) -> String {
    if !raw.contains('<') && !raw.contains('&') {
        return collapse_whitespace(raw);
    }
    let tree = parse_fragment(raw);
    collapse_whitespace(&tree.text(tree.root()))
}

pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl DomTree {
    pub fn empty() -> Self {
        DomTree {
            nodes: vec![DomNode {
                kind: NodeKind::Document,
                parent: None,
                children: Vec::new(),
            }],
        }
    }

    fn from_html(html: &Html) -> Self {
        let mut tree = DomTree::empty();
        // (source node, parent id in our arena); children pushed in reverse so
        // pops come out in document order.
        let root = html.tree.root();
        let mut stack: Vec<_> = root.children().rev().map(|c| (c, 0usize)).collect();
        while let Some((node, parent)) = stack.pop() {
            let kind = match node.value() {
                Node::Element(el) => NodeKind::Element {
                    tag: el.name().to_string(),
                    attrs: el
                        .attrs()
                        .map(|(k, v)| (k.to_string(), v.to_string()))
                        .collect(),
                },
                Node::Text(t) => NodeKind::Text(t.to_string()),
                // Wrapper nodes are flattened into their parent.
                Node::Document | Node::Fragment => {
                    stack.extend(node.children().rev().map(|c| (c, parent)));
                    continue;
                }
                _ => continue,
            };
            let id = tree.nodes.len();
            tree.nodes.push(DomNode {
                kind,
                parent: Some(parent),
                children: Vec::new(),
            });
            tree.nodes[parent].children.push(id);
            stack.extend(node.children().rev().map(|c| (c, id)));
        }
        tree
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn node(&self, id: NodeId) -> &DomNode {
        &self.nodes[id]
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id].children
    }

    pub fn tag(&self, id: NodeId) -> Option<&str> {
        match &self.nodes[id].kind {
            NodeKind::Element { tag, .. } => Some(tag),
            _ => None,
        }
    }

    pub fn attr(&self, id: NodeId, name: &str) -> Option<&str> {
        match &self.nodes[id].kind {
            NodeKind::Element { attrs, .. } => attrs
                .iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| v.as_str()),
            _ => None,
        }
    }

    /// Strict descendants of `id`, in document order.
    pub fn descendants(&self, id: NodeId) -> Descendants<'_> {
        Descendants {
            tree: self,
            stack: self.nodes[id].children.iter().rev().copied().collect(),
        }
    }

    /// Concatenated text of all descendant text nodes.
    pub fn text(&self, id: NodeId) -> String {
        let mut out = String::new();
        if let NodeKind::Text(t) = &self.nodes[id].kind {
            out.push_str(t);
        }
        for d in self.descendants(id) {
            if let NodeKind::Text(t) = &self.nodes[d].kind {
                out.push_str(t);
            }
        }
        out
    }

    pub fn inner_html(&self, id: NodeId) -> String {
        let mut out = String::new();
        for &c in &self.nodes[id].children {
            self.write_html(c, &mut out);
        }
        out
    }

    pub fn outer_html(&self, id: NodeId) -> String {
        let mut out = String::new();
        self.write_html(id, &mut out);
        out
    }

    fn write_html(&self, id: NodeId, out: &mut String) {
        enum Step {
            Open(NodeId),
            Close(NodeId),
        }
        let mut stack = vec![Step::Open(id)];
        while let Some(step) = stack.pop() {
            match step {
                Step::Open(n) => match &self.nodes[n].kind {
                    NodeKind::Text(t) => escape_into(out, t, false),
                    NodeKind::Document => {
                        stack.extend(self.nodes[n].children.iter().rev().map(|&c| Step::Open(c)))
                    }
                    NodeKind::Element { tag, attrs } => {
                        out.push('<');
                        out.push_str(tag);
                        for (k, v) in attrs {
                            out.push(' ');
                            out.push_str(k);
                            out.push_str("=\"");
                            escape_into(out, v, true);
                            out.push('"');
                        }
                        out.push('>');
                        if !VOID_ELEMENTS.contains(&tag.as_str()) {
                            stack.push(Step::Close(n));
                            stack.extend(self.nodes[n].children.iter().rev().map(|&c| Step::Open(c)));
                        }
                    }
                },
                Step::Close(n) => {
                    if let Some(tag) = self.tag(n) {
                        out.push_str("</");
                        out.push_str(tag);
                        out.push('>');
                    }
                }
            }
        }
    }

    /// Checks the arena is a tree: one parent per non-root node, parent and
    /// child links agree, every node reachable from the root exactly once.
    pub fn is_well_formed(&self) -> bool {
        if self.nodes.is_empty() || self.nodes[0].parent.is_some() {
            return false;
        }
        let mut seen = vec![false; self.nodes.len()];
        seen[0] = true;
        for d in self.descendants(0) {
            if seen[d] {
                return false;
            }
            seen[d] = true;
        }
        if !seen.iter().all(|s| *s) {
            return false;
        }
        self.nodes.iter().enumerate().all(|(id, n)| {
            n.children
                .iter()
                .all(|&c| self.nodes[c].parent == Some(id))
                && n.parent.map_or(id == 0, |p| self.nodes[p].children.contains(&id))
        })
    }
}

fn escape_into(out: &mut String, s: &str, attr: bool) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' if !attr => out.push_str("&lt;"),
            '>' if !attr => out.push_str("&gt;"),
            '"' if attr => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
}

pub struct Descendants<'a> {
    tree: &'a DomTree,
    stack: Vec<NodeId>,
}

impl Iterator for Descendants<'_> {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        let id = self.stack.pop()?;
        self.stack
            .extend(self.tree.nodes[id].children.iter().rev().copied());
        Some(id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn elements<'a>(tree: &'a DomTree, tag: &str) -> Vec<NodeId> {
        tree.descendants(tree.root())
            .filter(|&n| tree.tag(n) == Some(tag))
            .collect()
    }

    #[test]
    fn single_paragraph() {
        let tree = parse_dom(b"<p>a</p>");
        let ps = elements(&tree, "p");
        assert_eq!(ps.len(), 1);
        assert_eq!(tree.text(ps[0]), "a");
        assert!(tree.is_well_formed());
    }

    #[test]
    fn unclosed_paragraphs_become_siblings() {
        let tree = parse_dom(b"<div><p>a<p>b</div>");
        let div = elements(&tree, "div")[0];
        let kids: Vec<_> = tree.children(div).to_vec();
        assert_eq!(kids.len(), 2);
        assert!(kids.iter().all(|&k| tree.tag(k) == Some("p")));
        assert_eq!(tree.text(kids[0]), "a");
        assert_eq!(tree.text(kids[1]), "b");
    }

    #[test]
    fn empty_input_is_empty_document() {
        let tree = parse_dom(b"");
        assert!(tree.is_empty());
        assert!(tree.is_well_formed());
    }

    #[test]
    fn attributes_and_inner_html() {
        let tree = parse_dom(br#"<ul id="x"><li class="a">1 &amp; 2</li><li>3<br>4</li></ul>"#);
        let ul = elements(&tree, "ul")[0];
        assert_eq!(tree.attr(ul, "id"), Some("x"));
        assert_eq!(
            tree.inner_html(ul),
            r#"<li class="a">1 &amp; 2</li><li>3<br>4</li>"#
        );
        assert_eq!(tree.text(ul), "1 & 234");
    }

    #[test]
    fn strip_markup_decodes_and_collapses() {
        assert_eq!(strip_markup("<span>Delhi</span>"), "Delhi");
        assert_eq!(strip_markup("  Tom &amp; <b>Jerry</b>\n "), "Tom & Jerry");
        assert_eq!(strip_markup("It&#39;s   fine"), "It's fine");
        assert_eq!(strip_markup("plain"), "plain");
    }

    #[test]
    fn document_order_preserved() {
        let tree = parse_dom(b"<ol><li>1</li><li>2</li><li>3</li></ol>");
        let texts: Vec<_> = elements(&tree, "li").iter().map(|&n| tree.text(n)).collect();
        assert_eq!(texts, ["1", "2", "3"]);
    }

    proptest! {
        #[test]
        fn parsing_is_total(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
            let tree = parse_dom(&bytes);
            prop_assert!(tree.is_well_formed());
        }

        #[test]
        fn tag_soup_is_total(parts in proptest::collection::vec(
            prop_oneof![
                Just("<div>"), Just("</div>"), Just("<p>"), Just("</p>"), Just("<table>"),
                Just("<td>"), Just("</tr>"), Just("<a href=\"x\">"), Just("text"), Just("&amp"),
                Just("<!--"), Just("<script>"), Just("</"), Just("<li>"), Just(">")
            ], 0..64)) {
            let tree = parse_dom(parts.concat().as_bytes());
            prop_assert!(tree.is_well_formed());
        }
    }
}
