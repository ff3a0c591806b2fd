//! Collision profiles: which links interfere with which receivers.
//!
//! A profile over `M` links assigns every link `i` a collision set `I(i)`,
//! the links whose transmissions can destroy packets addressed to `i`'s
//! receiver. Profiles are directed: `j ∈ I(i)` does not require `i ∈ I(j)`.
//! Link indices are 0-based in this API; the profile file format and all
//! CLI-facing reports use the 1-based indices people write in the files.

use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphError {
    /// A line that does not match the `M <int>` / `I <i>: <j> ...` grammar.
    Syntax { line: usize, message: String },
    /// The `M` header is missing or appears after collision-set lines.
    MissingHeader,
    /// Link count below the smallest meaningful network.
    TooFewLinks { links: usize },
    /// `i ∈ I(i)` was declared.
    SelfCollision { line: usize, link: usize },
    /// A 1-based index outside `1..=M`.
    IndexOutOfRange { line: usize, index: i64, links: usize },
    /// Two `I <i>:` lines name the same link.
    DuplicateSet { line: usize, link: usize },
    /// A link that interferes with nobody and suffers no interference.
    IsolatedLink { link: usize },
    /// The undirected support of the profile splits into components.
    Disconnected,
    /// A 0-based link index passed to an accessor is out of range.
    LinkOutOfRange { index: usize, links: usize },
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::Syntax { line, message } => {
                write!(f, "profile syntax error on line {line}: {message}")
            }
            GraphError::MissingHeader => {
                write!(f, "profile must start with an `M <count>` header line")
            }
            GraphError::TooFewLinks { links } => {
                write!(f, "profile needs at least 2 links, got {links}")
            }
            GraphError::SelfCollision { line, link } => {
                write!(f, "line {line}: link {link} lists itself as an interferer")
            }
            GraphError::IndexOutOfRange { line, index, links } => {
                write!(f, "line {line}: link index {index} outside 1..={links}")
            }
            GraphError::DuplicateSet { line, link } => {
                write!(f, "line {line}: duplicate collision set for link {link}")
            }
            GraphError::IsolatedLink { link } => write!(
                f,
                "link {link} is isolated: it neither suffers nor causes collisions"
            ),
            GraphError::Disconnected => write!(
                f,
                "profile is disconnected; pass allow_disconnected to accept it"
            ),
            GraphError::LinkOutOfRange { index, links } => {
                write!(f, "link index {index} out of range for {links} links")
            }
        }
    }
}

impl std::error::Error for GraphError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollisionGraph {
    collision_sets: Vec<BTreeSet<usize>>,
}

impl CollisionGraph {
    /// Builds a profile from explicit collision sets, enforcing the structural
    /// invariants: no self-collision, indices in range, no isolated link, and
    /// weak connectivity unless `allow_disconnected`.
    pub fn new(
        collision_sets: Vec<BTreeSet<usize>>,
        allow_disconnected: bool,
    ) -> Result<Self, GraphError> {
        let m = collision_sets.len();
        if m < 2 {
            return Err(GraphError::TooFewLinks { links: m });
        }
        for (i, set) in collision_sets.iter().enumerate() {
            if set.contains(&i) {
                return Err(GraphError::SelfCollision { line: 0, link: i + 1 });
            }
            if let Some(&j) = set.iter().next_back() {
                if j >= m {
                    return Err(GraphError::IndexOutOfRange {
                        line: 0,
                        index: j as i64 + 1,
                        links: m,
                    });
                }
            }
        }
        let graph = CollisionGraph { collision_sets };
        if let Some(link) = graph.first_isolated_link() {
            return Err(GraphError::IsolatedLink { link: link + 1 });
        }
        if !allow_disconnected && !graph.is_weakly_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(graph)
    }

    /// Parses the profile file format:
    ///
    /// ```text
    /// # comment
    /// M 3
    /// I 1: 2 3
    /// I 2: 1
    /// I 3: 1
    /// ```
    ///
    /// Blank lines and `#` comments are ignored. Links without an `I` line
    /// get an empty collision set (they must still appear in someone else's).
    pub fn parse_profile(text: &str, allow_disconnected: bool) -> Result<Self, GraphError> {
        let mut m: Option<usize> = None;
        let mut sets: Vec<BTreeSet<usize>> = Vec::new();
        let mut seen: Vec<Option<usize>> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            match tokens.next() {
                Some("M") => {
                    if m.is_some() {
                        return Err(GraphError::Syntax {
                            line: line_no,
                            message: "repeated M header".to_string(),
                        });
                    }
                    let count: usize = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| GraphError::Syntax {
                            line: line_no,
                            message: "expected `M <count>`".to_string(),
                        })?;
                    if tokens.next().is_some() {
                        return Err(GraphError::Syntax {
                            line: line_no,
                            message: "trailing tokens after link count".to_string(),
                        });
                    }
                    if count < 2 {
                        return Err(GraphError::TooFewLinks { links: count });
                    }
                    m = Some(count);
                    sets = vec![BTreeSet::new(); count];
                    seen = vec![None; count];
                }
                Some("I") => {
                    let links = m.ok_or(GraphError::MissingHeader)?;
                    let rest = line[1..].trim_start();
                    let (head, tail) =
                        rest.split_once(':').ok_or_else(|| GraphError::Syntax {
                            line: line_no,
                            message: "expected `I <i>: <j> ...`".to_string(),
                        })?;
                    let i = parse_link_index(head.trim(), line_no, links)?;
                    if seen[i].is_some() {
                        return Err(GraphError::DuplicateSet {
                            line: line_no,
                            link: i + 1,
                        });
                    }
                    seen[i] = Some(line_no);
                    for tok in tail.split_whitespace() {
                        let j = parse_link_index(tok, line_no, links)?;
                        if j == i {
                            return Err(GraphError::SelfCollision {
                                line: line_no,
                                link: i + 1,
                            });
                        }
                        sets[i].insert(j);
                    }
                }
                Some(other) => {
                    return Err(GraphError::Syntax {
                        line: line_no,
                        message: format!("unrecognized directive {other:?}"),
                    })
                }
                None => unreachable!("blank lines are skipped"),
            }
        }

        if m.is_none() {
            return Err(GraphError::MissingHeader);
        }
        Self::new(sets, allow_disconnected)
    }

    /// Fully-interfering network: `I(i)` holds every other link.
    pub fn multiple_access(links: usize) -> Result<Self, GraphError> {
        if links < 2 {
            return Err(GraphError::TooFewLinks { links });
        }
        let sets = (0..links)
            .map(|i| (0..links).filter(|&j| j != i).collect())
            .collect();
        CollisionGraph::new(sets, false)
    }

    /// Chain topology where link `i` (0-based) hears its predecessor and the
    /// three links after it: `I(i) = {i-1, i+1, i+2, i+3} ∩ [0, M)`.
    pub fn line_network(links: usize) -> Result<Self, GraphError> {
        if links < 2 {
            return Err(GraphError::TooFewLinks { links });
        }
        let sets = (0..links as i64)
            .map(|i| {
                [i - 1, i + 1, i + 2, i + 3]
                    .into_iter()
                    .filter(|&j| j >= 0 && j < links as i64)
                    .map(|j| j as usize)
                    .collect()
            })
            .collect();
        CollisionGraph::new(sets, false)
    }

    pub fn num_links(&self) -> usize {
        self.collision_sets.len()
    }

    pub fn collision_set(&self, link: usize) -> &BTreeSet<usize> {
        &self.collision_sets[link]
    }

    /// `J(i) = I(i) ∪ {i}`: the links whose offsets matter at receiver `i`.
    pub fn index_set(&self, link: usize) -> Result<BTreeSet<usize>, GraphError> {
        if link >= self.num_links() {
            return Err(GraphError::LinkOutOfRange {
                index: link,
                links: self.num_links(),
            });
        }
        let mut set = self.collision_sets[link].clone();
        set.insert(link);
        Ok(set)
    }

    /// Adjacency matrix `E` with `E[i][j] = 1` iff link `i` interferes with
    /// link `j`'s receiver, i.e. `i ∈ I(j)`. Column `j` therefore lists
    /// `I(j)`, and `E + Id` drives the boundary eigenproblem in `region`.
    pub fn adjacency_matrix(&self) -> Vec<Vec<u8>> {
        let m = self.num_links();
        let mut e = vec![vec![0u8; m]; m];
        for (j, set) in self.collision_sets.iter().enumerate() {
            for &i in set {
                e[i][j] = 1;
            }
        }
        e
    }

    /// Links that appear on either side of some collision relation.
    fn first_isolated_link(&self) -> Option<usize> {
        let m = self.num_links();
        let mut touched = vec![false; m];
        for (i, set) in self.collision_sets.iter().enumerate() {
            for &j in set {
                touched[i] = true;
                touched[j] = true;
            }
        }
        touched.iter().position(|&t| !t)
    }

    /// Connectivity of the undirected support graph.
    pub fn is_weakly_connected(&self) -> bool {
        let m = self.num_links();
        let mut adj = vec![Vec::new(); m];
        for (i, set) in self.collision_sets.iter().enumerate() {
            for &j in set {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        let mut seen = vec![false; m];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

fn parse_link_index(token: &str, line: usize, links: usize) -> Result<usize, GraphError> {
    let value: i64 = token.parse().map_err(|_| GraphError::Syntax {
        line,
        message: format!("expected a link index, got {token:?}"),
    })?;
    if value < 1 || value as usize > links {
        return Err(GraphError::IndexOutOfRange {
            line,
            index: value,
            links,
        });
    }
    Ok(value as usize - 1)
}
