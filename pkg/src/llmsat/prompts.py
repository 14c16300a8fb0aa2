"""Prompt text sent to the model."""

from importlib import resources

# The trailing newline of the data file is not part of the prompt.
SYSTEM_PROMPT = (
    resources.files("llmsat.data").joinpath("system_prompt.txt").read_text(encoding="utf-8").rstrip("\n")
)

FORMAT_REMINDER = """Could not parse a valid action. Respond with exactly one json blob in this format:

Thought: consider previous and subsequent steps
Action:
```
{
  "action": $TOOL_NAME,
  "action_input": $INPUT
}
```"""
