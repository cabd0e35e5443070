//! Groot2-compatible XML subset.
//!
//! Accepted: an optional `<root>` wrapper (any attributes), one or more
//! `<BehaviorTree>` elements of which the one named by
//! `main_tree_to_execute` (or else the first) is used, `Sequence` and
//! `Fallback` composites, and any other element as an action whose tag is
//! the action name. Attributes other than `name` are ignored, as are
//! sibling elements such as `<TreeNodesModel>`.

use super::{BtError, BtNode, NodeKind};

/// The shipped default tree; also embedded so no file is needed.
pub const DEFAULT_TREE_XML: &str = include_str!("default_tree.xml");

pub fn parse_bt_xml(text: &str) -> Result<BtNode, BtError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| BtError::XmlSyntax(e.to_string()))?;
    let root = doc.root_element();

    let trees: Vec<roxmltree::Node> = if root.has_tag_name("BehaviorTree") {
        vec![root]
    } else {
        root.children()
            .filter(|n| n.is_element() && n.has_tag_name("BehaviorTree"))
            .collect()
    };
    let main = root.attribute("main_tree_to_execute");
    let tree = main
        .and_then(|id| trees.iter().find(|t| t.attribute("ID") == Some(id)))
        .or_else(|| trees.first())
        .ok_or_else(|| BtError::EmptyTree("no <BehaviorTree> element".into()))?;

    let mut elems = tree.children().filter(|n| n.is_element());
    let first = elems
        .next()
        .ok_or_else(|| BtError::EmptyTree("<BehaviorTree> has no root node".into()))?;
    if elems.next().is_some() {
        return Err(BtError::EmptyTree("<BehaviorTree> must have exactly one root node".into()));
    }
    let node = convert(first)?;
    node.check_arity()?;
    Ok(node)
}

fn convert(el: roxmltree::Node) -> Result<BtNode, BtError> {
    let tag = el.tag_name().name();
    let kind = match tag {
        "Sequence" => NodeKind::Sequence,
        "Fallback" => NodeKind::Fallback,
        other => NodeKind::Action(other.to_string()),
    };
    let children = el
        .children()
        .filter(|n| n.is_element())
        .map(convert)
        .collect::<Result<Vec<_>, _>>()?;
    if let NodeKind::Action(name) = &kind {
        if !children.is_empty() {
            return Err(BtError::ActionWithChildren(name.clone()));
        }
    }
    Ok(BtNode {
        kind,
        children,
        display_name: el.attribute("name").unwrap_or(tag).to_string(),
    })
}

/// Render `tree` in the same dialect [`parse_bt_xml`] reads.
pub fn serialize_bt_xml(tree: &BtNode) -> String {
    let mut out = String::from("<root BTCPP_format=\"4\" main_tree_to_execute=\"MainTree\">\n");
    out.push_str("  <BehaviorTree ID=\"MainTree\">\n");
    write_node(tree, 2, &mut out);
    out.push_str("  </BehaviorTree>\n</root>\n");
    out
}

fn write_node(node: &BtNode, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    let tag = node.tag();
    let name_attr = if node.display_name != tag {
        format!(" name=\"{}\"", escape(&node.display_name))
    } else {
        String::new()
    };
    if node.children.is_empty() {
        out.push_str(&format!("{pad}<{tag}{name_attr}/>\n"));
    } else {
        out.push_str(&format!("{pad}<{tag}{name_attr}>\n"));
        for c in &node.children {
            write_node(c, depth + 1, out);
        }
        out.push_str(&format!("{pad}</{tag}>\n"));
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
