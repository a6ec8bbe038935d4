//! The fixed tool sets handed to each specialist.

use super::{ParamKind as K, Registry, ToolSignature};
use crate::role::SpecialistRole;
use crate::spec::Platform;

const ENV_TOOLS: &[&str] = &["send_email", "exec_command", "probe"];

/// Tools that act on the environment during setup.
pub fn environment_tool_names() -> &'static [&'static str] {
    ENV_TOOLS
}

/// Every tool name any registry can contain.
pub fn all_tool_names() -> Vec<&'static str> {
    vec![
        "send_email",
        "exec_command",
        "probe",
        "env_diff",
        "launch_agent",
        "navigate",
        "click_text",
        "type_verified",
        "press_key",
        "read_screen",
        "wait_for_completion",
    ]
}

pub fn send_email() -> ToolSignature {
    ToolSignature::new("send_email", "Deliver a fresh email to the user's inbox from the fixed test domain.")
        .param("to", K::String, true)
        .param("subject", K::String, false)
        .param("body", K::String, false)
        .param("attachments", K::Array, false)
        .param("sender_name", K::String, false)
}

pub fn exec_command() -> ToolSignature {
    ToolSignature::new("exec_command", "Run a shell command line inside the user's home directory (no sudo).")
        .param("cmdline", K::String, true)
}

pub fn probe() -> ToolSignature {
    ToolSignature::new(
        "probe",
        "Read-only inspection. domain=fs with a path, domain=mail with inbox, sent, inbox/<text>, sent/<text> or thread/<text>.",
    )
    .param("domain", K::String, true)
    .param("selector", K::String, true)
}

pub fn env_diff() -> ToolSignature {
    ToolSignature::new("env_diff", "Entities added, removed or modified since the subject agent started.")
}

fn launch_tools(platform: Platform) -> ToolSignature {
    match platform {
        Platform::Cli | Platform::Desktop => {
            ToolSignature::new("launch_agent", "Start the subject agent in the terminal using its launch instructions.")
        }
        Platform::WebApp | Platform::BrowserExtension => {
            ToolSignature::new("navigate", "Open the subject agent's page.").param("url", K::String, false)
        }
    }
}

fn ui_tools() -> Vec<ToolSignature> {
    vec![
        ToolSignature::new("click_text", "Click on visible text. Use relation/anchor or ordinal when the text repeats.")
            .param("target", K::String, true)
            .param("relation", K::String, false)
            .param("anchor", K::String, false)
            .param("ordinal", K::Integer, false),
        ToolSignature::new("type_verified", "Type into the focused input and verify the text appeared.")
            .param("text", K::String, true),
        ToolSignature::new("press_key", "Press a key such as Enter, Tab or Escape.").param("key", K::String, true),
        ToolSignature::new("read_screen", "Return the current screen contents."),
        ToolSignature::new("wait_for_completion", "Wait until the subject agent finishes or goes quiet.")
            .param("timeout_secs", K::Integer, false),
    ]
}

pub fn registry_for(role: SpecialistRole, platform: Platform) -> Registry {
    let tools = match role {
        SpecialistRole::InfrastructureManager => vec![send_email(), exec_command(), probe()],
        SpecialistRole::Investigator => vec![probe(), env_diff()],
        SpecialistRole::Engineer => {
            let mut t = vec![launch_tools(platform)];
            t.extend(ui_tools());
            t
        }
        SpecialistRole::TestArchitect | SpecialistRole::TestAnalyst | SpecialistRole::Judge => Vec::new(),
    };
    Registry { role, tools }
}
