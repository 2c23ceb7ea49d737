//! Idiom specifications and the two prompt templates built from them.
//!
//! Both templates are byte-exact: the serialized gold output and the response
//! parser depend on the wording, so any edit here must be mirrored in the
//! golden files under `tests/fixtures/prompt`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::NumberedFile;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Training,
    InDomain,
    NearTransfer,
    FarTransfer,
    HardPep,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdiomSpec {
    pub code: String,
    pub name: String,
    pub definition: String,
    pub rationale: String,
    pub bad_example: String,
    pub good_example: String,
    pub source_linter: String,
    pub category: Category,
}

impl IdiomSpec {
    fn validate(&self, locator: &str) -> Result<()> {
        if self.code.trim().is_empty() {
            return Err(Error::validation(locator, "empty idiom code"));
        }
        if self.definition.trim().is_empty() {
            return Err(Error::validation(
                locator,
                format!("idiom {} has an empty definition", self.code),
            ));
        }
        if self.category != Category::HardPep
            && (self.bad_example.trim().is_empty() || self.good_example.trim().is_empty())
        {
            return Err(Error::validation(
                locator,
                format!(
                    "idiom {} needs both a bad and a good example (only hard_pep specs may omit them)",
                    self.code
                ),
            ));
        }
        Ok(())
    }
}

/// Immutable, validated set of idiom specs in load order.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    specs: Vec<IdiomSpec>,
    index: HashMap<String, usize>,
}

impl Catalog {
    pub fn from_specs(specs: Vec<IdiomSpec>) -> Result<Self> {
        let mut catalog = Catalog::default();
        for (i, spec) in specs.into_iter().enumerate() {
            catalog.insert(spec, &format!("spec #{}", i + 1))?;
        }
        Ok(catalog)
    }

    fn insert(&mut self, spec: IdiomSpec, locator: &str) -> Result<()> {
        spec.validate(locator)?;
        if self.index.contains_key(&spec.code) {
            return Err(Error::validation(
                locator,
                format!("duplicate idiom code {}", spec.code),
            ));
        }
        self.index.insert(spec.code.clone(), self.specs.len());
        self.specs.push(spec);
        Ok(())
    }

    pub fn get(&self, code: &str) -> Option<&IdiomSpec> {
        self.index.get(code).map(|&i| &self.specs[i])
    }

    pub fn specs(&self) -> &[IdiomSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn codes_in(&self, category: Category) -> Vec<String> {
        self.specs
            .iter()
            .filter(|s| s.category == category)
            .map(|s| s.code.clone())
            .collect()
    }

    /// Merges another catalog into this one; codes must stay unique.
    pub fn extend(&mut self, other: Catalog) -> Result<()> {
        for spec in other.specs {
            let locator = format!("merged spec {}", spec.code);
            self.insert(spec, &locator)?;
        }
        Ok(())
    }
}

/// Loads specs from a JSONL file, or from every `*.jsonl` file in a directory (sorted by name).
pub fn load_specs(path: &Path) -> Result<Catalog> {
    let files = if path.is_dir() {
        let mut v: Vec<_> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
            .collect();
        v.sort();
        v
    } else if path.is_file() {
        vec![path.to_path_buf()]
    } else {
        return Err(Error::Config(format!(
            "spec catalog {} does not exist",
            path.display()
        )));
    };

    let mut catalog = Catalog::default();
    for file in files {
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let locator = format!("{}:{}", file.display(), idx + 1);
            let spec: IdiomSpec = serde_json::from_str(line)
                .map_err(|e| Error::validation(&locator, e.to_string()))?;
            catalog.insert(spec, &locator)?;
        }
    }
    Ok(catalog)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    /// The compact prompt used for training and preference sampling.
    #[default]
    Instruction,
    /// The instruction prompt plus an explicit output-format section, used for untrained models.
    Baseline,
}

impl Template {
    pub fn as_str(self) -> &'static str {
        match self {
            Template::Instruction => "instruction",
            Template::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRef {
    pub path: String,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptInstance {
    pub idiom_codes: Vec<String>,
    pub file_ref: FileRef,
    pub text: String,
    pub template: Template,
}

pub const PROMPT_HEADER: &str =
    "Look at the following list of code idiom specifications with definitions and examples:";

pub const TASK_INSTRUCTION: &str = "Given these idioms, your task is to look at a code file and detect violations of the above idioms, and flag them like a linter. You should also suggest a fix if possible. Report the results per idiom specification mentioned above and just say 'NO VIOLATIONS FOUND' if no violations are found for a given idiom. Do not detect any idioms not specified above.";

pub const PROMPT_TRAILER: &str = "Violations per idiom:";

pub const FINAL_SECTION_HEADER: &str = "### Final Idiom Violations Found";

/// Output-format section of the baseline prompt, reproduced verbatim (wording quirks included).
pub const BASELINE_OUTPUT_FORMAT: &str = r####"# OUTPUT FORMAT

I want you to generate your output under a section called "### Final Idiom Violations Found".

Structure you response for a given idiom XYZ as follows for cases with violations:

### Final Idiom Violations Found

**Idiom XYZ Violations:**

{"line": " 12 \t\t#event = forms.ModelChoiceField(queryset=Inquiry.objects.filter(owner=kwargs.pop('user')))", "fix": null}
{"line": "  1 from django import forms\n  2 from django.forms.models import inlineformset_factory\n  3 from .models import Request\n  4 from inquiry.models import *", "fix": [{"before": "from django import forms\nfrom django.forms.models import inlineformset_factory\nfrom .models import Request\nfrom inquiry.models import *\n\n\n\n", "after": "from django import forms\nfrom django.forms.models import inlineformset_factory\nfrom inquiry.models import *\n\nfrom .models import Request\n\n\n"}]}

and as follows for cases with violations:

### Final Idiom Violations Found

**Idiom XYZ Violations:**

NO VIOLATIONS FOUND"####;

pub fn render_idiom_block(spec: &IdiomSpec) -> String {
    let mut block = format!(
        "# Idiom {} ({})\n\nDefinition: {}\n\nRationale: {}",
        spec.code, spec.name, spec.definition, spec.rationale
    );
    if !spec.bad_example.is_empty() {
        block.push_str("\n\nExample:\n");
        block.push_str(&spec.bad_example);
    }
    if !spec.good_example.is_empty() {
        block.push_str("\n\n\nUse instead:\n\n");
        block.push_str(&spec.good_example);
    }
    block
}

pub fn render_prompt(specs: &[&IdiomSpec], file: &NumberedFile, template: Template) -> PromptInstance {
    assert!(!specs.is_empty(), "a prompt needs at least one idiom spec");
    let blocks = specs
        .iter()
        .map(|s| render_idiom_block(s))
        .collect::<Vec<_>>()
        .join("\n\n");
    let mut text = format!(
        "{PROMPT_HEADER}\n{blocks}\n\n{TASK_INSTRUCTION}\n\nCode file:\n{}\n\n",
        file.body()
    );
    if template == Template::Baseline {
        text.push_str(BASELINE_OUTPUT_FORMAT);
        text.push_str("\n\n");
    }
    text.push_str(PROMPT_TRAILER);
    PromptInstance {
        idiom_codes: specs.iter().map(|s| s.code.clone()).collect(),
        file_ref: FileRef {
            path: file.source.path.clone(),
            digest: file.source.digest(),
        },
        text,
        template,
    }
}

pub fn render_instruction_prompt(specs: &[&IdiomSpec], file: &NumberedFile) -> PromptInstance {
    render_prompt(specs, file, Template::Instruction)
}

pub fn render_baseline_prompt(specs: &[&IdiomSpec], file: &NumberedFile) -> PromptInstance {
    render_prompt(specs, file, Template::Baseline)
}

/// Idiom codes named by `# Idiom <code> (...)` headers, in order of appearance.
pub fn extract_idiom_codes(prompt: &str) -> Vec<String> {
    prompt
        .lines()
        .filter_map(|l| l.strip_prefix("# Idiom "))
        .filter_map(|rest| rest.split_whitespace().next())
        .map(str::to_string)
        .collect()
}
