//! Policy backend reached over HTTP: the wire request is POSTed as JSON and
//! the body is the wire response.

use std::time::Duration;

use arrowpush::search::{Policy, PolicyError, PolicyRequest, Proposal, WireRequest, WireResponse};

pub struct HttpPolicy {
    url: String,
    client: reqwest::blocking::Client,
}

impl HttpPolicy {
    pub fn new(url: impl Into<String>) -> Result<HttpPolicy, PolicyError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| PolicyError::Protocol(e.to_string()))?;
        Ok(HttpPolicy { url: url.into(), client })
    }
}

impl Policy for HttpPolicy {
    fn name(&self) -> &str {
        &self.url
    }

    fn propose(&self, req: &PolicyRequest<'_>) -> Result<Vec<Proposal>, PolicyError> {
        let resp = self
            .client
            .post(&self.url)
            .json(&WireRequest::from_request(req))
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| PolicyError::Protocol(e.to_string()))?;
        let body: WireResponse = resp.json().map_err(|e| PolicyError::Protocol(e.to_string()))?;
        Ok(body.proposals)
    }
}
