//! Page segmentation.
//!
//! Raw HTML is split into leaf block-level content blocks in document order.
//! Every block remembers the headings that enclose it (`section_path`), a
//! sanitized copy of its markup and a scroll offset used for teleporting back
//! to it. Segmentation is a pure function of `(html, url, captured_at,
//! layout)`.

use ego_tree::NodeRef;
use scraper::{Html, Node};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{collapse_whitespace, short_hash};

/// Milliseconds since the Unix epoch.
pub type Timestamp = i64;

/// Number of body blocks treated as the page's opening paragraphs.
pub const OPENING_BLOCK_LIMIT: usize = 3;

const ESTIMATED_LINE_PX: i64 = 24;
const ESTIMATED_CHARS_PER_LINE: usize = 80;
const ESTIMATED_BLOCK_MARGIN_PX: i64 = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PageError {
    #[error("document has no text-bearing blocks")]
    EmptyDocument,
    #[error("url is not absolute: {0}")]
    MalformedUrl(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Paragraph,
    ListItem,
    Code,
    TableCellGroup,
    Heading,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentBlock {
    pub block_id: String,
    pub kind: BlockKind,
    pub text: String,
    pub html: String,
    /// Enclosing heading texts, outermost first. Never includes the block itself.
    pub section_path: Vec<String>,
    /// 1..=6 for heading blocks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading_level: Option<u8>,
    pub order_index: usize,
    pub scroll_offset: i64,
    /// True when `scroll_offset` was estimated rather than reported by the client.
    pub scroll_offset_estimated: bool,
}

impl ContentBlock {
    pub fn is_heading(&self) -> bool {
        self.kind == BlockKind::Heading
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageSnapshot {
    pub page_id: String,
    pub url: String,
    pub title: String,
    pub captured_at: Timestamp,
    pub blocks: Vec<ContentBlock>,
    pub table_headers: Vec<String>,
    pub opening_block_ids: Vec<String>,
}

impl PageSnapshot {
    pub fn block(&self, block_id: &str) -> Option<&ContentBlock> {
        self.blocks.iter().find(|b| b.block_id == block_id)
    }

    /// Title used when the page stands in for an option; falls back to the url.
    pub fn display_title(&self) -> &str {
        if self.title.is_empty() {
            &self.url
        } else {
            &self.title
        }
    }

    pub fn headings(&self) -> impl Iterator<Item = &ContentBlock> {
        self.blocks.iter().filter(|b| b.is_heading())
    }
}

/// Client-reported layout for one block, keyed by `order_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutHint {
    pub block_index: usize,
    pub scroll_offset: i64,
}

/// Default page id: a content hash of the url and markup.
pub fn default_page_id(url: &str, html: &str) -> String {
    format!("pg-{}", short_hash(&[url, html], 12))
}

pub fn segment_page(html: &str, url: &str, captured_at: Timestamp) -> Result<PageSnapshot, PageError> {
    segment_page_with_layout(html, url, captured_at, &[])
}

pub fn segment_page_with_layout(
    html: &str,
    url: &str,
    captured_at: Timestamp,
    layout: &[LayoutHint],
) -> Result<PageSnapshot, PageError> {
    match url::Url::parse(url) {
        Ok(parsed) if !parsed.cannot_be_a_base() => {}
        _ => return Err(PageError::MalformedUrl(url.to_string())),
    }

    let document = Html::parse_document(html);
    let mut walker = Walker::default();
    walker.walk_container(document.tree.root(), BlockKind::Other);

    if walker.raw.is_empty() {
        return Err(PageError::EmptyDocument);
    }

    let title = document_title(document.tree.root())
        .or_else(|| {
            walker
                .raw
                .iter()
                .find(|b| b.heading_level == Some(1))
                .or_else(|| walker.raw.iter().find(|b| b.heading_level.is_some()))
                .map(|b| b.text.clone())
        })
        .unwrap_or_default();

    let blocks = assign_positions(url, walker.raw, layout);
    let opening_block_ids = blocks
        .iter()
        .filter(|b| !matches!(b.kind, BlockKind::Heading | BlockKind::Code))
        .take(OPENING_BLOCK_LIMIT)
        .map(|b| b.block_id.clone())
        .collect();

    Ok(PageSnapshot {
        page_id: default_page_id(url, html),
        url: url.to_string(),
        title,
        captured_at,
        blocks,
        table_headers: walker.table_headers,
        opening_block_ids,
    })
}

/// The page's opening body blocks (headings and code excluded).
pub fn opening_paragraphs(page: &PageSnapshot) -> Vec<&ContentBlock> {
    page.opening_block_ids
        .iter()
        .filter_map(|id| page.block(id))
        .collect()
}

fn assign_positions(url: &str, raw: Vec<RawBlock>, layout: &[LayoutHint]) -> Vec<ContentBlock> {
    let mut blocks = Vec::with_capacity(raw.len());
    let mut cursor: i64 = 0;
    for (order_index, block) in raw.into_iter().enumerate() {
        let hinted = layout
            .iter()
            .find(|h| h.block_index == order_index)
            .map(|h| h.scroll_offset);
        let (offset, estimated) = match hinted {
            Some(offset) => (offset.max(cursor), false),
            None => (cursor, true),
        };
        cursor = offset + estimated_height(&block.text);
        let block_id = format!(
            "b-{}",
            short_hash(&[url, &order_index.to_string(), &block.text], 16)
        );
        blocks.push(ContentBlock {
            block_id,
            kind: block.kind,
            text: block.text,
            html: block.html,
            section_path: block.section_path,
            heading_level: block.heading_level,
            order_index,
            scroll_offset: offset,
            scroll_offset_estimated: estimated,
        });
    }
    blocks
}

fn estimated_height(text: &str) -> i64 {
    let chars = text.chars().count().max(1);
    let lines = chars.div_ceil(ESTIMATED_CHARS_PER_LINE) as i64;
    lines * ESTIMATED_LINE_PX + ESTIMATED_BLOCK_MARGIN_PX
}

struct RawBlock {
    kind: BlockKind,
    text: String,
    html: String,
    section_path: Vec<String>,
    heading_level: Option<u8>,
}

#[derive(Default)]
struct Walker {
    raw: Vec<RawBlock>,
    headings: Vec<(u8, String)>,
    table_headers: Vec<String>,
}

type DomNode<'a> = NodeRef<'a, Node>;

impl Walker {
    fn section_path(&self) -> Vec<String> {
        self.headings.iter().map(|(_, text)| text.clone()).collect()
    }

    /// Walks a container, emitting its direct inline content as runs broken
    /// up by nested block-level children.
    fn walk_container(&mut self, node: DomNode<'_>, kind: BlockKind) {
        let mut run: Vec<DomNode<'_>> = Vec::new();
        for child in node.children() {
            match classify(child) {
                Class::Skip => {}
                Class::Inline => run.push(child),
                Class::Heading(level) => {
                    self.flush_run(&mut run, kind);
                    self.emit_heading(child, level);
                }
                Class::Atomic(child_kind) => {
                    self.flush_run(&mut run, kind);
                    self.emit_atomic(child, child_kind);
                }
                Class::Container(child_kind) => {
                    self.flush_run(&mut run, kind);
                    if has_block_descendant(child) {
                        self.walk_container(child, child_kind);
                    } else {
                        self.emit_atomic(child, child_kind);
                    }
                }
            }
        }
        self.flush_run(&mut run, kind);
    }

    fn flush_run(&mut self, run: &mut Vec<DomNode<'_>>, kind: BlockKind) {
        if run.is_empty() {
            return;
        }
        let mut text = String::new();
        let mut html = String::new();
        for node in run.iter() {
            collect_text(*node, &mut text);
            serialize(*node, &mut html);
        }
        run.clear();
        let text = collapse_whitespace(&text);
        if text.is_empty() {
            return;
        }
        self.raw.push(RawBlock {
            kind,
            text,
            html: html.trim().to_string(),
            section_path: self.section_path(),
            heading_level: None,
        });
    }

    fn emit_heading(&mut self, node: DomNode<'_>, level: u8) {
        let mut text = String::new();
        collect_text(node, &mut text);
        let text = collapse_whitespace(&text);
        if text.is_empty() {
            return;
        }
        while self.headings.last().is_some_and(|(l, _)| *l >= level) {
            self.headings.pop();
        }
        let mut html = String::new();
        serialize(node, &mut html);
        self.raw.push(RawBlock {
            kind: BlockKind::Heading,
            text: text.clone(),
            html,
            section_path: self.section_path(),
            heading_level: Some(level),
        });
        self.headings.push((level, text));
    }

    fn emit_atomic(&mut self, node: DomNode<'_>, kind: BlockKind) {
        if kind == BlockKind::TableCellGroup {
            self.collect_table_headers(node);
        }
        let mut text = String::new();
        collect_text(node, &mut text);
        let text = collapse_whitespace(&text);
        if text.is_empty() {
            return;
        }
        let mut html = String::new();
        serialize(node, &mut html);
        self.raw.push(RawBlock {
            kind,
            text,
            html,
            section_path: self.section_path(),
            heading_level: None,
        });
    }

    fn collect_table_headers(&mut self, row: DomNode<'_>) {
        for cell in row.children() {
            if element_name(cell) == Some("th") {
                let mut text = String::new();
                collect_text(cell, &mut text);
                let text = collapse_whitespace(&text);
                if !text.is_empty() && !self.table_headers.contains(&text) {
                    self.table_headers.push(text);
                }
            }
        }
    }
}

enum Class {
    Skip,
    Inline,
    Heading(u8),
    Atomic(BlockKind),
    Container(BlockKind),
}

const SKIPPED: &[&str] = &[
    "script", "style", "noscript", "template", "head", "title", "svg", "canvas", "iframe",
    "object", "embed", "math",
];

const CONTAINERS: &[&str] = &[
    "html", "body", "main", "article", "section", "aside", "header", "footer", "nav", "div",
    "blockquote", "ul", "ol", "menu", "dl", "dt", "dd", "figure", "figcaption", "table", "thead",
    "tbody", "tfoot", "caption", "form", "fieldset", "details", "summary", "address", "center",
    "li", "p", "hgroup", "search",
];

fn element_name<'a>(node: DomNode<'a>) -> Option<&'a str> {
    match node.value() {
        Node::Element(el) => Some(el.name()),
        _ => None,
    }
}

fn classify(node: DomNode<'_>) -> Class {
    let el = match node.value() {
        Node::Text(_) => return Class::Inline,
        Node::Element(el) => el,
        _ => return Class::Skip,
    };
    let name = el.name();
    if SKIPPED.contains(&name) || el.attr("hidden").is_some() || el.attr("aria-hidden") == Some("true") {
        return Class::Skip;
    }
    if let Some(level) = heading_level(name) {
        return Class::Heading(level);
    }
    match name {
        "pre" => return Class::Atomic(BlockKind::Code),
        "tr" => return Class::Atomic(BlockKind::TableCellGroup),
        _ => {}
    }
    if CONTAINERS.contains(&name) {
        let kind = match name {
            "p" => BlockKind::Paragraph,
            "li" => BlockKind::ListItem,
            _ => BlockKind::Other,
        };
        return Class::Container(kind);
    }
    // inline element wrapping block content is walked like a generic container
    if has_block_descendant(node) {
        Class::Container(BlockKind::Other)
    } else {
        Class::Inline
    }
}

fn heading_level(name: &str) -> Option<u8> {
    match name {
        "h1" => Some(1),
        "h2" => Some(2),
        "h3" => Some(3),
        "h4" => Some(4),
        "h5" => Some(5),
        "h6" => Some(6),
        _ => None,
    }
}

fn has_block_descendant(node: DomNode<'_>) -> bool {
    node.children().any(|child| match classify(child) {
        Class::Heading(_) | Class::Atomic(_) | Class::Container(_) => true,
        Class::Skip | Class::Inline => false,
    })
}

fn document_title(root: DomNode<'_>) -> Option<String> {
    for node in root.descendants() {
        if element_name(node) == Some("title") {
            let mut text = String::new();
            for child in node.children() {
                if let Node::Text(t) = child.value() {
                    text.push_str(t);
                }
            }
            let text = collapse_whitespace(&text);
            if !text.is_empty() {
                return Some(text);
            }
        }
    }
    None
}

/// Elements whose boundaries separate words in the projected text.
const TEXT_BREAKS: &[&str] = &["br", "td", "th", "li", "p", "div", "tr", "hr", "dt", "dd"];

fn collect_text(node: DomNode<'_>, out: &mut String) {
    match node.value() {
        Node::Text(t) => out.push_str(t),
        Node::Element(el) => {
            let name = el.name();
            if SKIPPED.contains(&name) || el.attr("hidden").is_some() {
                return;
            }
            let breaks = TEXT_BREAKS.contains(&name);
            if breaks {
                out.push(' ');
            }
            for child in node.children() {
                collect_text(child, out);
            }
            if breaks {
                out.push(' ');
            }
        }
        _ => {}
    }
}

const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "source", "track",
    "wbr",
];

/// Writes sanitized markup: skipped elements, comments, event-handler
/// attributes and `javascript:` urls are dropped.
fn serialize(node: DomNode<'_>, out: &mut String) {
    match node.value() {
        Node::Text(t) => escape_into(t, false, out),
        Node::Element(el) => {
            let name = el.name();
            if SKIPPED.contains(&name) {
                return;
            }
            out.push('<');
            out.push_str(name);
            let mut attrs: Vec<(&str, &str)> = el.attrs().collect();
            attrs.sort_unstable();
            for (key, value) in attrs {
                let lower = key.to_ascii_lowercase();
                if lower.starts_with("on") {
                    continue;
                }
                if matches!(lower.as_str(), "href" | "src" | "action")
                    && value.trim_start().to_ascii_lowercase().starts_with("javascript:")
                {
                    continue;
                }
                out.push(' ');
                out.push_str(key);
                out.push_str("=\"");
                escape_into(value, true, out);
                out.push('"');
            }
            out.push('>');
            if VOID_ELEMENTS.contains(&name) {
                return;
            }
            for child in node.children() {
                serialize(child, out);
            }
            out.push_str("</");
            out.push_str(name);
            out.push('>');
        }
        _ => {}
    }
}

fn escape_into(text: &str, attribute: bool, out: &mut String) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attribute => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const URL: &str = "https://example.com/post";

    #[test]
    fn single_paragraph() {
        let page = segment_page("<html><head><title>T</title></head><body><p>hello world</p></body></html>", URL, 0).unwrap();
        assert_eq!(page.title, "T");
        assert_eq!(page.blocks.len(), 1);
        assert_eq!(page.blocks[0].kind, BlockKind::Paragraph);
        assert_eq!(page.blocks[0].text, "hello world");
        assert!(page.blocks[0].section_path.is_empty());
    }

    #[test]
    fn heading_scopes_following_paragraphs() {
        let html = "<h2>Performance</h2><p>fast</p><p>very fast</p>";
        let page = segment_page(html, URL, 0).unwrap();
        assert_eq!(page.blocks.len(), 3);
        assert!(page.blocks[0].section_path.is_empty());
        assert_eq!(page.blocks[1].section_path, vec!["Performance"]);
        assert_eq!(page.blocks[2].section_path, vec!["Performance"]);
    }

    #[test]
    fn nested_heading_levels_pop_correctly() {
        let html = "<h1>Top</h1><h2>A</h2><h3>A1</h3><p>x</p><h2>B</h2><p>y</p>";
        let page = segment_page(html, URL, 0).unwrap();
        let x = page.blocks.iter().find(|b| b.text == "x").unwrap();
        let y = page.blocks.iter().find(|b| b.text == "y").unwrap();
        let b = page.blocks.iter().find(|b| b.text == "B").unwrap();
        assert_eq!(x.section_path, vec!["Top", "A", "A1"]);
        assert_eq!(y.section_path, vec!["Top", "B"]);
        assert_eq!(b.section_path, vec!["Top"]);
        // title falls back to the first h1
        assert_eq!(page.title, "Top");
    }

    #[test]
    fn containers_only_emit_direct_text() {
        let html = "<div>intro text<p>inner para</p>tail text</div>";
        let page = segment_page(html, URL, 0).unwrap();
        let texts: Vec<_> = page.blocks.iter().map(|b| b.text.as_str()).collect();
        assert_eq!(texts, vec!["intro text", "inner para", "tail text"]);
        assert_eq!(page.blocks[0].kind, BlockKind::Other);
        assert_eq!(page.blocks[1].kind, BlockKind::Paragraph);
    }

    #[test]
    fn nested_lists_do_not_double_count() {
        let html = "<ul><li>outer <b>bold</b><ul><li>inner</li></ul></li></ul>";
        let page = segment_page(html, URL, 0).unwrap();
        let texts: Vec<_> = page.blocks.iter().map(|b| b.text.as_str()).collect();
        assert_eq!(texts, vec!["outer bold", "inner"]);
        assert!(page.blocks.iter().all(|b| b.kind == BlockKind::ListItem));
    }

    #[test]
    fn table_rows_are_blocks_and_headers_are_collected() {
        let html = "<table><tr><th>Library</th><th>Size</th></tr><tr><td>Swiper</td><td>40kb</td></tr></table>";
        let page = segment_page(html, URL, 0).unwrap();
        assert_eq!(page.blocks.len(), 2);
        assert!(page.blocks.iter().all(|b| b.kind == BlockKind::TableCellGroup));
        assert_eq!(page.blocks[1].text, "Swiper 40kb");
        assert_eq!(page.table_headers, vec!["Library", "Size"]);
    }

    #[test]
    fn scripts_and_handlers_are_sanitized() {
        let html = "<p onclick=\"evil()\">safe <a href=\"javascript:x()\">link</a></p><script>var a = 1;</script>";
        let page = segment_page(html, URL, 0).unwrap();
        assert_eq!(page.blocks.len(), 1);
        assert_eq!(page.blocks[0].text, "safe link");
        assert_eq!(page.blocks[0].html, "<p>safe <a>link</a></p>");
    }

    #[test]
    fn code_blocks_keep_kind() {
        let page = segment_page("<p>a</p><pre><code>let x = 1;</code></pre>", URL, 0).unwrap();
        assert_eq!(page.blocks[1].kind, BlockKind::Code);
        assert_eq!(page.blocks[1].text, "let x = 1;");
    }

    #[test]
    fn errors() {
        assert_eq!(segment_page("<p>x</p>", "/relative", 0), Err(PageError::MalformedUrl("/relative".into())));
        assert_eq!(segment_page("<div>   </div><script>x</script>", URL, 0), Err(PageError::EmptyDocument));
    }

    #[test]
    fn opening_paragraphs_skip_headings_and_take_three() {
        let html = "<h1>H</h1><p>1</p><p>2</p><pre>c</pre><p>3</p><p>4</p><p>5</p>";
        let page = segment_page(html, URL, 0).unwrap();
        let texts: Vec<_> = opening_paragraphs(&page).iter().map(|b| b.text.clone()).collect();
        assert_eq!(texts, vec!["1", "2", "3"]);

        let short = segment_page("<p>a</p><p>b</p>", URL, 0).unwrap();
        assert_eq!(opening_paragraphs(&short).len(), 2);
    }

    #[test]
    fn layout_hints_override_estimates_and_stay_monotone() {
        let html = "<p>a</p><p>b</p><p>c</p>";
        let layout = [
            LayoutHint { block_index: 1, scroll_offset: 500 },
            LayoutHint { block_index: 2, scroll_offset: 100 },
        ];
        let page = segment_page_with_layout(html, URL, 0, &layout).unwrap();
        assert_eq!(page.blocks[0].scroll_offset, 0);
        assert!(page.blocks[0].scroll_offset_estimated);
        assert_eq!(page.blocks[1].scroll_offset, 500);
        assert!(!page.blocks[1].scroll_offset_estimated);
        assert!(page.blocks[2].scroll_offset >= 500);
    }

    #[test]
    fn block_ids_are_stable() {
        let html = "<p>one</p><p>two</p>";
        let a = segment_page(html, URL, 1).unwrap();
        let b = segment_page(html, URL, 1).unwrap();
        assert_eq!(a, b);
        let other = segment_page(html, "https://example.com/other", 1).unwrap();
        assert_ne!(a.blocks[0].block_id, other.blocks[0].block_id);
    }
}
