#include "prism/scan/rules.hpp"

namespace prism::scan {

// Shipped default rule set. Weights are drawn from {15, 25, 40, 60}: a single
// 60-point match lands in "suspicious", two strong matches reach "malicious".
std::vector<HeuristicRule> default_rules() {
  using C = Category;
  return {
      // instruction override
      {"io.ignore_previous", C::instruction_override,
       R"(\b(ignore|disregard|forget|skip)\s+(all\s+|any\s+|the\s+|your\s+|of\s+|these\s+|those\s+|my\s+)*)"
       R"((previous|prior|above|earlier|preceding|original|existing)\s+)"
       R"((instructions?|directions?|rules?|prompts?|guidelines?|directives?|context))",
       60},
      {"io.new_instructions", C::instruction_override,
       R"(\b(new|updated|revised|real|actual)\s+(instructions?|directives?|orders)\s*:)", 40},
      {"io.bypass_safety", C::instruction_override,
       R"(\b(bypass|disable|circumvent|turn\s+off)\s+(your\s+|the\s+|all\s+|any\s+)*)"
       R"((safety|security|content)?\s*(guardrails?|restrictions?|filters?|policies|safeguards?))",
       40},
      {"io.from_now_on", C::instruction_override,
       R"(\b(from\s+now\s+on|instead)\s*,?\s+you\s+(must|will|shall|should)\b)", 25},

      // system prompt exfiltration
      {"spx.reveal_prompt", C::system_prompt_exfil,
       R"(\b(reveal|show|print|display|repeat|output|leak|dump|disclose)\s+(me\s+)?(your|the)\s+)"
       R"((full\s+|entire\s+|hidden\s+|original\s+|secret\s+|initial\s+)*)"
       R"((system\s+prompt|system\s+message|hidden\s+instructions|initial\s+instructions|developer\s+message))",
       60},
      {"spx.ask_prompt", C::system_prompt_exfil,
       R"(\bwhat\s+(is|are|was|were)\s+your\s+(system\s+prompt|initial\s+instructions|hidden\s+instructions)\b)",
       40},
      {"spx.verbatim", C::system_prompt_exfil, R"(\b(verbatim|word\s+for\s+word)\b)", 15},

      // credential exfiltration
      {"cx.send_secrets", C::credential_exfil,
       R"(\b(send|post|upload|forward|transmit|exfiltrate|email|leak)\b[^.\n]{0,60}?)"
       R"(\b(api[\s_-]?keys?|access\s+tokens?|auth\s+tokens?|passwords?|credentials|secrets|private\s+keys?)\b)",
       60},
      {"cx.secret_files", C::credential_exfil,
       R"((\.ssh/id_(rsa|ed25519|ecdsa)|\.aws/credentials|/etc/shadow|\.git-credentials|\.netrc\b))", 40},
      {"cx.env_dump", C::credential_exfil,
       R"((\bprintenv\b|\benv\s*\||\bcat\s+\S*\.env\b|\becho\s+\$\w*(key|token|secret)))", 40},
      {"cx.harvest", C::credential_exfil,
       R"(\b(collect|gather|harvest|extract)\s+(all\s+)?(the\s+)?(api[\s_-]?keys?|passwords|credentials|secrets|tokens)\b)",
       25},

      // tool abuse
      {"ta.pipe_to_shell", C::tool_abuse, R"(\b(curl|wget)\b[^|\n]{0,200}\|\s*(sudo\s+)?(ba|z|da)?sh\b)", 60},
      {"ta.reverse_shell", C::tool_abuse, R"((/dev/tcp/|\b(nc|ncat|netcat)\b[^\n]{0,40}\s-e\s|\bmkfifo\b))", 60},
      {"ta.recursive_delete", C::tool_abuse, R"(\brm\s+-(rf|fr)\s+(/|~|\*|\$home))", 40},
      {"ta.inline_interpreter", C::tool_abuse, R"(\b(bash|sh|zsh|python3?|perl|node)\s+-(c|e)\s)", 25},
      {"ta.setuid", C::tool_abuse, R"(\bchmod\s+(\+s|u\+s|4755|777)\b)", 15},

      // role override
      {"ro.you_are_now", C::role_override, R"(\byou\s+are\s+(now|no\s+longer)\b)", 40},
      {"ro.privileged_mode", C::role_override, R"(\b(developer|god|jailbreak|dan|unrestricted)\s+mode\b)", 40},
      {"ro.act_as", C::role_override,
       R"(\b(act|behave|respond)\s+as\s+(an?\s+)?(unrestricted|unfiltered|uncensored|jailbroken|evil)\b)", 25},
      {"ro.pretend", C::role_override, R"(\bpretend\s+(to\s+be|you\s+are|that\s+you)\b)", 15},

      // format tokens
      {"ft.chatml", C::format_token, R"(<\|(im_start|im_end|system|endoftext|assistant|user)\|>)", 60},
      {"ft.inst_markers", C::format_token, R"((\[/?inst\]|<<\s*/?sys\s*>>))", 40},
      {"ft.role_tags", C::format_token, R"(</?(system|assistant|developer)>)", 25},
      {"ft.role_prefix", C::format_token, R"((^|[\s>])(system|assistant)\s*:\s)", 15},

      // obfuscation signals
      {"ob.decode_exec", C::obfuscation, R"(\b(base64\s+(-d|--decode)|atob\s*\(|b64decode))", 40},
      {"ob.hidden_directive", C::obfuscation, R"(\b(hidden|invisible|secret)\s+(instructions?|directives?|commands?)\b)",
       25},
      {"ob.encoded_blob", C::obfuscation, R"([a-z0-9+/]{64,}={0,2})", 15},
      {"ob.cipher_hint", C::obfuscation, R"(\b(rot13|rot-13|decode\s+this\s+and\s+(follow|execute|run)))", 15},
  };
}

}  // namespace prism::scan
