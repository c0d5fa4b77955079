#include "judgeflow/trace.hpp"

#include <sstream>

namespace judgeflow {

json snapshot_state(const json& state, std::size_t max_len) {
  json out = json::object();
  for (auto it = state.begin(); it != state.end(); ++it) {
    if (it.value().is_string())
      out[it.key()] = truncate_field(it.value().get<std::string>(), max_len);
    else
      out[it.key()] = it.value();
  }
  return out;
}

std::string render_trace_xml(const ExecutionTrace& trace) {
  std::ostringstream xml;
  xml << "<trace query-id=\"" << xml_escape(trace.query_id) << "\">\n";
  for (const auto& b : trace.blocks) {
    xml << "  <block name=\"" << xml_escape(b.name) << "\" type=\""
        << block_variant_name(b.variant) << "\"";
    if (b.variant == BlockVariant::For) xml << " iterations=\"" << b.iterations << "\"";
    if (b.variant == BlockVariant::Cond) {
      xml << " branch=\"" << b.branch << "\"";
      if (b.degraded) xml << " degraded=\"true\"";
    }
    xml << ">\n";
    xml << "    <input>" << xml_escape(canonical_dump(b.input_state)) << "</input>\n";
    xml << "    <output>" << xml_escape(canonical_dump(b.output_state)) << "</output>\n";
    for (const auto& op : b.invocations) {
      xml << "    <op alias=\"" << xml_escape(op.alias) << "\">\n";
      xml << "      <input>digest:" << xml_escape(op.prompt_digest) << "</input>\n";
      xml << "      <output>" << xml_escape(op.output) << "</output>\n";
      xml << "    </op>\n";
    }
    xml << "  </block>\n";
  }
  xml << "</trace>\n";
  return xml.str();
}

}  // namespace judgeflow
