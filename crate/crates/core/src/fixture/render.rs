//! HTML rendering of fixture profiles.
//!
//! Every profile is rendered through the same templates, so element
//! identifiers are stable across profiles; only the content differs. The
//! identifiers are listed in `docs/fixture-schema.md`.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{FixtureError, FixtureNetwork, FixturePost, FixtureProfile};
use crate::model::{format_count, Attribute, ReactionKind, Section, DATE_FORMAT, TIME_FORMAT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSizes {
    pub friends: usize,
    pub timeline: usize,
}

impl PageSizes {
    pub fn uniform(size: usize) -> Self {
        PageSizes {
            friends: size,
            timeline: size,
        }
    }
}

impl Default for PageSizes {
    fn default() -> Self {
        PageSizes {
            friends: 100,
            timeline: 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PageKind {
    About,
    Friends,
    Timeline,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HtmlPage {
    pub kind: PageKind,
    /// 1-based; always 1 for the About page.
    pub page_no: usize,
    pub path: String,
    pub html: String,
}

/// Number of pages for `items` entries; an empty list still has one page.
pub fn page_count(items: usize, page_size: usize) -> usize {
    items.div_ceil(page_size.max(1)).max(1)
}

pub fn profile_path(profile_id: &str) -> String {
    format!("/profile/{profile_id}")
}

pub fn page_path(profile_id: &str, kind: PageKind, page_no: usize) -> String {
    match kind {
        PageKind::About => format!("/profile/{profile_id}/about"),
        PageKind::Friends => format!("/profile/{profile_id}/friends?page={page_no}"),
        PageKind::Timeline => format!("/profile/{profile_id}/timeline?page={page_no}"),
    }
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

fn slug(text: &str) -> String {
    text.chars()
        .filter_map(|c| {
            if c.is_ascii_alphanumeric() {
                Some(c.to_ascii_lowercase())
            } else if c == ' ' {
                Some('-')
            } else {
                None
            }
        })
        .collect()
}

fn head(out: &mut String, title: &str) {
    out.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head><meta charset=\"utf-8\">");
    let _ = write!(out, "<title>{}</title></head>\n<body>\n", escape(title));
    out.push_str("<nav id=\"top-bar\"><a href=\"/\">Home</a></nav>\n");
}

fn tail(out: &mut String) {
    out.push_str("</body>\n</html>\n");
}

fn scalar_field(out: &mut String, attr: Attribute, label: &str, value_html: &str) {
    let _ = writeln!(
        out,
        "<div class=\"field\" data-field=\"{}\"><span class=\"label\">{}</span><span class=\"value\">{}</span></div>",
        attr.name(),
        label,
        value_html
    );
}

fn list_field(out: &mut String, attr: Attribute, label: &str, items: &[String]) {
    let _ = write!(
        out,
        "<div class=\"field\" data-field=\"{}\"><span class=\"label\">{}</span><ul class=\"values\">",
        attr.name(),
        label
    );
    for item in items {
        let _ = write!(out, "<li class=\"item\">{item}</li>");
    }
    out.push_str("</ul></div>\n");
}

fn place_link(city: &str) -> String {
    format!("<a href=\"/places/{}\">{}</a>", slug(city), escape(city))
}

fn profile_link(profile_id: &str) -> String {
    format!(
        "<a href=\"{}\">{}</a>",
        profile_path(profile_id),
        escape(profile_id)
    )
}

pub fn about_page(network: &FixtureNetwork, profile_id: &str) -> Result<String, FixtureError> {
    let p = network.profile(profile_id)?;
    let friend_count = network.degree(profile_id)?;
    Ok(render_about(p, friend_count))
}

fn render_about(p: &FixtureProfile, friend_count: usize) -> String {
    let shown = |a: Attribute| p.disclosure.is_disclosed(a);
    let mut out = String::with_capacity(4096);
    head(&mut out, &format!("About {}", p.profile_id));
    let _ = writeln!(
        out,
        "<div id=\"profile\" data-profile-id=\"{}\">\n<h1 id=\"profile-name\">{}</h1>",
        escape(&p.profile_id),
        escape(&p.profile_id)
    );
    for section in Section::ALL {
        let _ = writeln!(out, "<section id=\"{}\">", section.element_id());
        match section {
            Section::BasicInformation => {
                if shown(Attribute::Gender) {
                    scalar_field(&mut out, Attribute::Gender, "Gender", p.gender.label());
                }
                if shown(Attribute::Birthday) {
                    let date = p.birthday.format(DATE_FORMAT).to_string();
                    scalar_field(&mut out, Attribute::Birthday, "Birthday", &date);
                }
                if shown(Attribute::Email) {
                    let e = escape(&p.email);
                    let html = format!("<a href=\"mailto:{e}\">{e}</a>");
                    scalar_field(&mut out, Attribute::Email, "Email", &html);
                }
                if shown(Attribute::Phone) {
                    let html = format!("<span dir=\"ltr\">{}</span>", escape(&p.phone));
                    scalar_field(&mut out, Attribute::Phone, "Mobile", &html);
                }
            }
            Section::PlacesLived => {
                if shown(Attribute::Hometown) {
                    scalar_field(&mut out, Attribute::Hometown, "Home town", &place_link(&p.hometown));
                }
                if shown(Attribute::CurrentCity) {
                    let html = place_link(&p.current_city);
                    scalar_field(&mut out, Attribute::CurrentCity, "Current city", &html);
                }
            }
            Section::FamilyAndRelationship => {
                if shown(Attribute::RelationshipStatus) {
                    let label = escape(p.relationship_status.label());
                    scalar_field(&mut out, Attribute::RelationshipStatus, "Relationship", &label);
                }
                if shown(Attribute::FamilyMembers) {
                    let items: Vec<String> = p.family_members.iter().map(|f| profile_link(f)).collect();
                    list_field(&mut out, Attribute::FamilyMembers, "Family members", &items);
                }
            }
            Section::FriendCount => {
                let _ = writeln!(
                    out,
                    "<h2>Friends</h2><span class=\"value\">{}</span>",
                    format_count(friend_count as u64)
                );
            }
            Section::PagesLiked => {
                if shown(Attribute::PagesLiked) {
                    let items: Vec<String> = p
                        .pages_liked
                        .iter()
                        .map(|name| format!("<a href=\"/pages/{}\">{}</a>", slug(name), escape(name)))
                        .collect();
                    list_field(&mut out, Attribute::PagesLiked, "Likes", &items);
                }
            }
            Section::GroupsJoined => {
                if shown(Attribute::GroupsJoined) {
                    let items: Vec<String> = p
                        .groups_joined
                        .iter()
                        .map(|name| format!("<a href=\"/groups/{}\">{}</a>", slug(name), escape(name)))
                        .collect();
                    list_field(&mut out, Attribute::GroupsJoined, "Groups", &items);
                }
            }
        }
        out.push_str("</section>\n");
    }
    out.push_str("</div>\n<footer id=\"page-end\">end of profile</footer>\n");
    tail(&mut out);
    out
}

fn next_link(out: &mut String, profile_id: &str, kind: PageKind, page_no: usize, pages: usize) {
    if page_no < pages {
        let _ = writeln!(
            out,
            "<a id=\"next\" href=\"{}\">See more</a>",
            page_path(profile_id, kind, page_no + 1)
        );
    }
}

/// Friends page `page_no` (1-based), or `None` past the last page.
pub fn friends_page(
    network: &FixtureNetwork,
    profile_id: &str,
    page_no: usize,
    page_size: usize,
) -> Result<Option<String>, FixtureError> {
    let friends = network.friends_of(profile_id)?;
    let pages = page_count(friends.len(), page_size);
    if page_no == 0 || page_no > pages {
        return Ok(None);
    }
    let size = page_size.max(1);
    let mut out = String::with_capacity(64 * size);
    head(&mut out, &format!("Friends of {profile_id}"));
    let _ = writeln!(out, "<div id=\"friends\" data-page=\"{page_no}\">\n<ul id=\"friend-list\">");
    for fid in friends.iter().skip((page_no - 1) * size).take(size) {
        let _ = writeln!(
            out,
            "<li class=\"friend\"><a class=\"friend-link\" href=\"{}\">{}</a></li>",
            profile_path(fid),
            escape(fid)
        );
    }
    out.push_str("</ul>\n");
    next_link(&mut out, profile_id, PageKind::Friends, page_no, pages);
    out.push_str("</div>\n");
    tail(&mut out);
    Ok(Some(out))
}

fn render_post(out: &mut String, post: &FixturePost) {
    let _ = writeln!(out, "<article class=\"post\" data-post-type=\"{}\">", post.post_type);
    let _ = writeln!(out, "<h3 class=\"post-title\">{}</h3>", escape(&post.title));
    let _ = writeln!(out, "<div class=\"post-content\"><p>{}</p></div>", escape(&post.content));
    let _ = writeln!(
        out,
        "<div class=\"post-meta\"><span class=\"post-date\">{}</span> at <span class=\"post-time\">{}</span></div>",
        post.date.format(DATE_FORMAT),
        post.time.format(TIME_FORMAT)
    );
    out.push_str("<ul class=\"post-emotions\">");
    for kind in ReactionKind::ALL {
        let n = post.reaction_counts.get(&kind).copied().unwrap_or(0);
        let _ = write!(
            out,
            "<li class=\"emotion\" data-kind=\"{}\"><b>{}</b></li>",
            kind.as_str(),
            format_count(n)
        );
    }
    out.push_str("</ul>\n");
    let _ = writeln!(
        out,
        "<div class=\"post-stats\"><span class=\"post-reactions\">{}</span> reactions \
         <span class=\"post-comments\">{}</span> comments \
         <span class=\"post-shares\">{}</span> shares",
        format_count(post.reaction_total()),
        format_count(post.comment_count),
        format_count(post.share_count)
    );
    if let Some(views) = post.view_count {
        let _ = writeln!(out, "<span class=\"post-views\">{}</span> views", format_count(views));
    }
    out.push_str("</div>\n<div class=\"post-tags\">");
    for tag in &post.tags {
        let _ = write!(out, "<a class=\"tag\" href=\"{}\">{}</a>", profile_path(tag), escape(tag));
    }
    out.push_str("</div>\n</article>\n");
}

/// Timeline page `page_no` (1-based, newest posts first), or `None` past the end.
pub fn timeline_page(
    network: &FixtureNetwork,
    profile_id: &str,
    page_no: usize,
    page_size: usize,
) -> Result<Option<String>, FixtureError> {
    let p = network.profile(profile_id)?;
    let pages = page_count(p.posts.len(), page_size);
    if page_no == 0 || page_no > pages {
        return Ok(None);
    }
    let size = page_size.max(1);
    let mut out = String::with_capacity(1024 * size);
    head(&mut out, &format!("Timeline of {profile_id}"));
    let _ = writeln!(out, "<div id=\"timeline\" data-page=\"{page_no}\">");
    for post in p.posts.iter().skip((page_no - 1) * size).take(size) {
        render_post(&mut out, post);
    }
    next_link(&mut out, profile_id, PageKind::Timeline, page_no, pages);
    out.push_str("</div>\n");
    tail(&mut out);
    Ok(Some(out))
}

/// All pages of one profile: About, every friends page, every timeline page.
pub fn render_profile_pages(
    network: &FixtureNetwork,
    profile_id: &str,
    sizes: PageSizes,
) -> Result<Vec<HtmlPage>, FixtureError> {
    let mut pages = vec![HtmlPage {
        kind: PageKind::About,
        page_no: 1,
        path: page_path(profile_id, PageKind::About, 1),
        html: about_page(network, profile_id)?,
    }];
    for (kind, size) in [
        (PageKind::Friends, sizes.friends),
        (PageKind::Timeline, sizes.timeline),
    ] {
        for page_no in 1.. {
            let html = match kind {
                PageKind::Friends => friends_page(network, profile_id, page_no, size)?,
                _ => timeline_page(network, profile_id, page_no, size)?,
            };
            let Some(html) = html else { break };
            pages.push(HtmlPage {
                kind,
                page_no,
                path: page_path(profile_id, kind, page_no),
                html,
            });
        }
    }
    Ok(pages)
}

/// Page shown to requests without a valid session. Carries no profile data.
pub fn login_wall() -> String {
    let mut out = String::new();
    head(&mut out, "Log in to continue");
    out.push_str("<div id=\"login-wall\"><p>You must log in to see this page.</p>");
    out.push_str("<form method=\"post\" action=\"/login\"><input name=\"login\"><input name=\"secret\" type=\"password\"></form></div>\n");
    tail(&mut out);
    out
}

/// Cuts a page roughly in half, as a connection dropped mid-transfer would.
pub fn truncate_page(html: &str) -> String {
    let mut cut = html.len() / 2;
    while !html.is_char_boundary(cut) {
        cut -= 1;
    }
    html[..cut].to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::{generate_network, GeneratorParams};

    fn network(n: usize, degree: f64) -> FixtureNetwork {
        generate_network(&GeneratorParams {
            n_profiles: n,
            mean_degree: degree,
            rng_seed: 21,
            ..GeneratorParams::default()
        })
        .unwrap()
    }

    #[test]
    fn isolated_profile_without_posts() {
        let mut net = network(3, 0.1);
        net.set_edges(vec![]).unwrap();
        net.profile_mut("u0").unwrap().posts.clear();
        let pages = render_profile_pages(&net, "u0", PageSizes::uniform(10)).unwrap();
        let kinds: Vec<_> = pages.iter().map(|p| (p.kind, p.page_no)).collect();
        assert_eq!(
            kinds,
            [(PageKind::About, 1), (PageKind::Friends, 1), (PageKind::Timeline, 1)]
        );
        assert!(pages.iter().all(|p| !p.html.contains("id=\"next\"")));
    }

    #[test]
    fn five_hundred_one_friends_make_six_pages() {
        let mut net = network(600, 1.0);
        for i in 1..=501 {
            net.add_friendship("u0", &format!("u{i}")).unwrap();
        }
        let degree = net.degree("u0").unwrap();
        let pages = render_profile_pages(&net, "u0", PageSizes::uniform(100)).unwrap();
        let friends: Vec<_> = pages.iter().filter(|p| p.kind == PageKind::Friends).collect();
        assert_eq!(friends.len(), degree.div_ceil(100));
        for (i, page) in friends.iter().enumerate() {
            assert_eq!(page.html.contains("id=\"next\""), i + 1 < friends.len());
        }
    }

    #[test]
    fn undisclosed_email_is_absent() {
        let mut net = network(10, 2.0);
        let p = net.profile_mut("u3").unwrap();
        p.disclosure.set(Attribute::Email, false);
        let html = about_page(&net, "u3").unwrap();
        assert!(!html.to_lowercase().contains("email"));
        assert!(!html.contains(&net.profile("u3").unwrap().email));
        net.profile_mut("u3").unwrap().disclosure.set(Attribute::Email, true);
        let html = about_page(&net, "u3").unwrap();
        assert!(html.contains("data-field=\"email\""));
    }

    #[test]
    fn page_counts_bound_items() {
        let net = network(120, 9.0);
        for p in &net.nodes {
            let pages = render_profile_pages(&net, &p.profile_id, PageSizes::uniform(4)).unwrap();
            let timeline = pages.iter().filter(|x| x.kind == PageKind::Timeline).count();
            assert!(timeline * 4 >= p.posts.len());
            assert!(p.posts.is_empty() || p.posts.len() > (timeline - 1) * 4);
        }
    }

    #[test]
    fn unknown_profile() {
        let net = network(3, 1.0);
        assert!(matches!(
            render_profile_pages(&net, "nobody", PageSizes::default()),
            Err(FixtureError::UnknownProfile(_))
        ));
    }

    #[test]
    fn truncation_drops_page_end() {
        let net = network(5, 1.0);
        let html = about_page(&net, "u1").unwrap();
        assert!(html.contains("page-end"));
        assert!(!truncate_page(&html).contains("page-end"));
    }
}
