//! Minimal credential-oriented URI splitting. Only the parts the checks care
//! about are extracted: userinfo, host, and `key=value` parameters.

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UriParts<'a> {
    pub scheme: &'a str,
    pub user: Option<&'a str>,
    pub password: Option<&'a str>,
    /// Host without port.
    pub host: &'a str,
    /// `key=value` pairs found after the authority (`?`, `&` or `;` separated).
    pub params: Vec<(&'a str, &'a str)>,
}

const USER_KEYS: [&str; 4] = ["user", "username", "uid", "user id"];
const PASSWORD_KEYS: [&str; 4] = ["password", "pwd", "pass", "passwd"];

impl<'a> UriParts<'a> {
    pub fn param(&self, keys: &[&str]) -> Option<&'a str> {
        self.params
            .iter()
            .find(|(k, _)| keys.iter().any(|want| k.eq_ignore_ascii_case(want)))
            .map(|(_, v)| *v)
    }

    /// Username from userinfo, else from parameters.
    pub fn effective_user(&self) -> Option<&'a str> {
        self.user
            .filter(|u| !u.is_empty())
            .or_else(|| self.param(&USER_KEYS).filter(|u| !u.is_empty()))
    }

    /// Password from userinfo, else from parameters.
    pub fn effective_password(&self) -> Option<&'a str> {
        self.password
            .filter(|p| !p.is_empty())
            .or_else(|| self.param(&PASSWORD_KEYS).filter(|p| !p.is_empty()))
    }
}

/// Split `raw` at `scheme://authority...`. `None` when there is no `://`.
pub fn split_uri(raw: &str) -> Option<UriParts<'_>> {
    let sep = raw.find("://")?;
    let scheme = &raw[..sep];
    let rest = &raw[sep + 3..];
    let auth_end = rest.find(['/', '?', '#', ';']).unwrap_or(rest.len());
    let authority = &rest[..auth_end];
    let tail = &rest[auth_end..];

    let (userinfo, hostport) = match authority.rfind('@') {
        Some(at) => (Some(&authority[..at]), &authority[at + 1..]),
        None => (None, authority),
    };
    let (user, password) = match userinfo {
        Some(info) => match info.split_once(':') {
            Some((u, p)) => (Some(u), Some(p)),
            None => (Some(info), None),
        },
        None => (None, None),
    };
    let host = if hostport.starts_with('[') {
        hostport.find(']').map_or(hostport, |i| &hostport[..=i])
    } else {
        hostport.split(':').next().unwrap_or(hostport)
    };
    let params = tail
        .split(['?', '&', ';', '#'])
        .filter_map(|pair| pair.split_once('='))
        .map(|(k, v)| (k.trim(), v))
        .filter(|(k, _)| !k.is_empty())
        .collect();
    Some(UriParts {
        scheme,
        user,
        password,
        host,
        params,
    })
}
