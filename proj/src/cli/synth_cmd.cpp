#include <fmt/format.h>

#include "ueval/cli.hpp"
#include "ueval/error.hpp"

namespace ueval::cli {

SynthMode parse_synth_mode(std::string_view name) {
  if (name == "id_ood") return SynthMode::id_ood;
  if (name == "calibrated") return SynthMode::calibrated;
  if (name == "multisample") return SynthMode::multisample;
  throw ConfigError(fmt::format("unknown synth mode '{}' (expected id_ood, calibrated or multisample)", name));
}

std::string_view to_string(SynthMode mode) {
  switch (mode) {
    case SynthMode::id_ood: return "id_ood";
    case SynthMode::calibrated: return "calibrated";
    case SynthMode::multisample: return "multisample";
  }
  return "id_ood";
}

SynthOutput cmd_synth(const SynthConfig& config) {
  SynthSpec spec = config.spec;
  SynthOutput out;
  switch (config.mode) {
    case SynthMode::id_ood:
      out = gen_id_ood(spec);
      break;
    case SynthMode::calibrated:
      spec.calibrated = true;
      spec.n_ood = 0;
      out = gen_id_ood(spec);
      break;
    case SynthMode::multisample:
      if (spec.samples < 2) throw ConfigError("synth: multisample mode needs samples >= 2");
      out = gen_id_ood(spec);
      break;
  }
  write_synth(config.output_dir, spec, out);
  return out;
}

}  // namespace ueval::cli
