//! Query identity shared by every module: logs, model vocabulary and the
//! completion index all see the same normalized text.

fn keep(c: char) -> bool {
    c.is_alphanumeric() || c == '-' || c == '\''
}

fn clean(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for c in raw.chars().flat_map(char::to_lowercase) {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
        } else if keep(c) {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(c);
        }
    }
    if pending_space {
        out.push(' ');
    }
    out
}

/// Lowercases, strips characters other than letters, digits, spaces,
/// hyphens and apostrophes, and collapses whitespace runs to one space.
pub fn normalize_query(raw: &str) -> String {
    let mut q = clean(raw);
    if q.ends_with(' ') {
        q.pop();
    }
    q
}

/// Same as [`normalize_query`] but keeps a single trailing space, which is
/// meaningful while the user is still typing ("memorial " excludes
/// "memorials").
pub fn normalize_prefix(raw: &str) -> String {
    clean(raw)
}
