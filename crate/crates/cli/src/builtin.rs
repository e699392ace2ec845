//! Fixture files compiled into the binary so the bundled scenarios run
//! without a checkout.

const FILES: &[(&str, &str)] = &[
    (
        "tooth_social.net.json",
        include_str!("../fixtures/tooth_social.net.json"),
    ),
    (
        "tooth_social.policy.json",
        include_str!("../fixtures/tooth_social.policy.json"),
    ),
    (
        "tooth_social.contract.json",
        include_str!("../fixtures/tooth_social.contract.json"),
    ),
    (
        "tooth_social.feature_spec.json",
        include_str!("../fixtures/tooth_social.feature_spec.json"),
    ),
    (
        "tooth_social.scenario.json",
        include_str!("../fixtures/tooth_social.scenario.json"),
    ),
    (
        "tooth_social_exoneration.scenario.json",
        include_str!("../fixtures/tooth_social_exoneration.scenario.json"),
    ),
];

pub const SCENARIOS: &[&str] = &["tooth_social", "tooth_social_exoneration"];

pub fn file(name: &str) -> Option<&'static str> {
    FILES.iter().find(|(n, _)| *n == name).map(|(_, body)| *body)
}

pub fn scenario(name: &str) -> Option<&'static str> {
    SCENARIOS
        .contains(&name)
        .then(|| file(&format!("{name}.scenario.json")))
        .flatten()
}
