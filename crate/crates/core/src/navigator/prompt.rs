//! Prompt assembly. The three templates below are functional protocol text
//! and are reproduced as published, placeholders included.

use super::session::Session;
use super::trace::{AgentStep, StepBody};
use crate::navigator::naming::ImageRole;
use crate::toolkit::{ToolResult, Toolkit};

/// Role and behaviour description; also sent as the system message by the
/// live backend.
pub const PREFIX: &str = r#"ChangeGPT is designed to specifically address queries related to changes observed in satellite imagery over time.

ChangeGPT is able to generate human-like text based on the input it receives, allowing it to engage in natural-sounding conversations and provide responses that are coherent and relevant to the topic at hand.

ChangeGPT can process and understand large amounts of remote sensing images, knowledge, and text. As a expertized language model, ChangeGPT cannot directly read remote sensing images, but it has a list of tools to leverage advanced tools to detect, quantify, and classify changes between images, providing insights into land cover transformations, urban expansion, environmental shifts, and more. Each pair of input remote sensing images will be carefully managed with a file name indicating their temporal relationship, labeled as "previous" (`_pre`) and "current" (`_cur`), for instance, "image/xxxx_pre.png" and "image/xxxx_cur.png". This naming convention ensures a structured approach to change detection, facilitating precise analysis and interpretation of temporal changes. ChangeGPT can invoke different tools to indirectly understand the remote sensing image.

When talking about images, ChangeGPT is very strict to the file name and will never fabricate nonexistent files. When using tools to generate new image files, ChangeGPT is also known that the image may not be the same as the user's demand, and will use other visual question answering tools or description tools to observe the real image. ChangeGPT is able to use tools in a sequence, and is loyal to the tool observation outputs rather than faking the image content and image file name. It will remember to provide the file name from the last tool observation, if a new image is generated. Human may provide new remote sensing images to ChangeGPT with a description. The description helps ChangeGPT to understand this image, but ChangeGPT should use tools to finish following tasks, rather than directly imagine from the description.

Overall, ChangeGPT is a powerful visual dialogue assistant tool that can help with a wide range of tasks about remote sensing changes and provide valuable insights and information on a wide range of applications on remote sensing changes."#;

const PREFIX_TOOLS: &str = "\n\nTOOLS:\n\nChangeGPT has access to the following tools:\n{tools}\n";

pub const FORMAT_INSTRUCTIONS: &str = r#"To use a tool, please use the following format:

Question: the input question you must answer
Thought: you should always think about what to do
Action: the action to take, should be one of [{tool_names}]
Action Input: the input to the action
Observation: the result of the action
... (this Thought/Action/Action Input/Observation can repeat N times)
Thought: I now know the final answer
Final Answer: the final answer to the original input question
"#;

pub const SUFFIX: &str = r#"You are very strict to the filename correctness and will never fake a file name if it does not exist.
You will remember to provide the image file name loyally if it's provided in the last tool observation.
Begin!
Previous conversation history:
{chat_history}
Question: {input}
Since ChangeGPT is a text language model, ChangeGPT must use tools to observe remote sensing images rather than imagination.
The thoughts and observations are only visible for ChangeGPT, ChangeGPT should remember to repeat important information in the final response for Human.
Thought: Do I need to use a tool? {agent_scratchpad} Let's think step by step.
"#;

/// Number of reference-log entries rendered into the reference section.
pub const REFERENCE_DEPTH: usize = 20;

const CORRECTION: &str = "Your previous reply could not be parsed:\n{malformed}\nReply with a line starting \"Thought:\" followed by either \"Action:\" and \"Action Input:\" lines, or a \"Final Answer:\" line.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub prefix: String,
    pub image_section: String,
    pub reference_section: String,
    pub format_instructions: String,
    pub suffix: String,
}

impl PromptBundle {
    pub fn render(&self) -> String {
        [
            self.prefix.as_str(),
            self.image_section.as_str(),
            self.reference_section.as_str(),
            self.format_instructions.as_str(),
            self.suffix.as_str(),
        ]
        .join("\n")
    }
}

/// Every registered image, one per line.
pub fn image_section(session: &Session) -> String {
    let mut s = String::from("IMAGES:\n");
    if session.image_count() == 0 {
        s.push_str("(none)\n");
    }
    for rec in session.records() {
        s.push_str("- ");
        s.push_str(&rec.describe());
        s.push('\n');
    }
    s
}

/// Derived and cropped artifacts plus the tail of the reference log.
pub fn reference_section(session: &Session) -> String {
    let mut s = String::from("REFERENCES:\nDerived images:\n");
    let mut any = false;
    for rec in session.records().filter(|r| !matches!(r.role, ImageRole::Pre | ImageRole::Cur)) {
        s.push_str(&format!("- {} from {}\n", rec.filename, rec.link_id));
        any = true;
    }
    if !any {
        s.push_str("(none)\n");
    }
    s.push_str("Recent log:\n");
    let recent = session.log().recent(REFERENCE_DEPTH);
    if recent.is_empty() {
        s.push_str("(empty)\n");
    }
    for e in recent {
        s.push_str(&format!("{e}\n"));
    }
    s
}

/// The `{agent_scratchpad}` rendering of the steps taken so far.
pub fn render_scratchpad(steps: &[AgentStep]) -> String {
    let mut s = String::new();
    for step in steps {
        if let StepBody::Action {
            action,
            action_input,
            observation,
        } = &step.body
        {
            s.push_str(&format!(
                "\nThought: {}\nAction: {}\nAction Input: {}\nObservation: {}\nThought: Do I need to use a tool?",
                step.thought, action, action_input, observation
            ));
        }
    }
    s
}

pub fn assemble(
    session: &Session,
    toolkit: &Toolkit,
    query: &str,
    steps: &[AgentStep],
    malformed: Option<&str>,
) -> ToolResult<PromptBundle> {
    let (tools, tool_names) = toolkit.render_prompt()?;
    let round = session.history().len() + 1;
    let mut scratchpad = render_scratchpad(steps);
    if let Some(bad) = malformed {
        scratchpad.push('\n');
        scratchpad.push_str(&CORRECTION.replace("{malformed}", bad.trim()));
    }
    Ok(PromptBundle {
        prefix: format!("{PREFIX}{}", PREFIX_TOOLS.replace("{tools}", &tools)),
        image_section: image_section(session),
        reference_section: reference_section(session),
        format_instructions: FORMAT_INSTRUCTIONS.replace("{tool_names}", &tool_names),
        suffix: SUFFIX
            .replace("{chat_history}", &session.history_view(round).render())
            .replace("{input}", query)
            .replace("{agent_scratchpad}", &scratchpad),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::navigator::session::Temporal;
    use image::RgbImage;

    fn session() -> Session {
        let mut s = Session::deterministic(7);
        let img = RgbImage::new(4, 4);
        let pre = s.register_rgb(img.clone(), Temporal::Pre, None).unwrap();
        s.register_rgb(img, Temporal::Cur, Some(pre.link_id.as_str())).unwrap();
        s
    }

    #[test]
    fn empty_history_leaves_blank_slot() {
        let s = session();
        let kit = Toolkit::standard(None);
        let p = assemble(&s, &kit, "Did water change?", &[], None).unwrap().render();
        assert!(p.contains("Previous conversation history:\n\nQuestion: Did water change?\n"));
        assert!(p.contains("\nFinal Answer: the final answer to the original input question\n"));
        assert!(p.contains("Thought: Do I need to use a tool?  Let's think step by step."));
        assert!(p.contains("should be one of [binary_change_detection, image_captioning"));
        assert!(p.contains("pixel_counting: "));
        for rec in s.records() {
            assert!(p.contains(&rec.describe()));
        }
        // fixed order: prefix, images, references, format, suffix
        let order = ["ChangeGPT is designed", "IMAGES:", "REFERENCES:", "To use a tool", "Begin!"];
        let pos: Vec<usize> = order.iter().map(|m| p.find(m).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn scratchpad_shape() {
        let steps = vec![AgentStep::action("need pixels", "pixel_counting", "image=pre, class=water")
            .with_observation("water pixels: 3")];
        assert_eq!(
            render_scratchpad(&steps),
            "\nThought: need pixels\nAction: pixel_counting\nAction Input: image=pre, class=water\nObservation: water pixels: 3\nThought: Do I need to use a tool?"
        );
    }

    #[test]
    fn deterministic_and_history_aware() {
        let mut s = session();
        let kit = Toolkit::standard(None);
        let a = assemble(&s, &kit, "q", &[], None).unwrap().render();
        let b = assemble(&s, &kit, "q", &[], None).unwrap().render();
        assert_eq!(a, b);
        s.push_turn("first?", "yes");
        let c = assemble(&s, &kit, "q", &[], None).unwrap().render();
        assert!(c.contains("Previous conversation history:\nHuman: first?\nAI: yes\n"));
    }

    #[test]
    fn correction_echoes_malformed_text() {
        let s = session();
        let kit = Toolkit::standard(None);
        let p = assemble(&s, &kit, "q", &[], Some("Thought: hmm")).unwrap().render();
        assert!(p.contains("could not be parsed:\nThought: hmm\n"));
    }

    #[test]
    fn empty_toolkit_is_an_error() {
        assert!(assemble(&session(), &Toolkit::new(), "q", &[], None).is_err());
    }
}
