#include "mesosim/io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mesosim::io {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

namespace {

json to_json(const net::NetworkSpec& spec) {
  json j;
  j["vehicle_length_m"] = spec.vehicle_length_m;
  j["mp_eligibility_threshold_s"] = spec.mp_eligibility_threshold_s;
  j["links"] = json::array();
  for (const auto& l : spec.links) {
    json jl{{"id", l.id},
            {"length_m", l.length_m},
            {"lanes", l.lanes},
            {"saturation_flow_vps", l.saturation_flow},
            {"free_flow_speed_mps", l.free_flow_speed},
            {"region", l.region}};
    if (!l.from_node.empty()) jl["from"] = l.from_node;
    if (!l.to_node.empty()) jl["to"] = l.to_node;
    if (l.is_origin) jl["is_origin"] = true;
    if (l.is_destination) jl["is_destination"] = true;
    j["links"].push_back(std::move(jl));
  }
  j["nodes"] = json::array();
  for (const auto& n : spec.nodes) {
    json jn{{"id", n.id},
            {"cycle_s", n.cycle_s},
            {"lost_time_s", n.lost_time_s},
            {"offset_s", n.offset_s},
            {"phases", json::array()}};
    for (const auto& p : n.phases) {
      json jp{{"id", p.id},
              {"fixed_green_s", p.fixed_green_s},
              {"min_green_s", p.min_green_s},
              {"approaches", json::array()}};
      for (const auto& [in, out] : p.approaches) {
        jp["approaches"].push_back(json::array({in, out}));
      }
      jn["phases"].push_back(std::move(jp));
    }
    j["nodes"].push_back(std::move(jn));
  }
  if (!spec.unsignalized_connections.empty()) {
    j["connections"] = json::array();
    for (const auto& [in, out] : spec.unsignalized_connections) {
      j["connections"].push_back(json::array({in, out}));
    }
  }
  json jp;
  jp["regions"] = spec.partition.regions;
  jp["boundary_groups"] = json::array();
  for (const auto& g : spec.partition.boundary_groups) {
    json jg{{"from", g.from_region},
            {"to", g.to_region},
            {"nodes", json::array()}};
    for (const auto& bn : g.nodes) {
      jg["nodes"].push_back(json{{"node", bn.node},
                                 {"primary_phase", bn.primary_phase},
                                 {"secondary_phase", bn.secondary_phase}});
    }
    jp["boundary_groups"].push_back(std::move(jg));
  }
  jp["external_entries"] = json::object();
  for (const auto& [region, links] : spec.partition.external_entries) {
    jp["external_entries"][region] = links;
  }
  j["partition"] = std::move(jp);
  return j;
}

net::NetworkSpec network_from_json(const json& j) {
  net::NetworkSpec spec;
  spec.vehicle_length_m = j.value("vehicle_length_m", 5.0);
  spec.mp_eligibility_threshold_s = j.value("mp_eligibility_threshold_s", 7.0);
  for (const auto& jl : j.at("links")) {
    net::LinkSpec l;
    l.id = jl.at("id").get<std::string>();
    l.from_node = jl.value("from", "");
    l.to_node = jl.value("to", "");
    l.length_m = jl.at("length_m").get<double>();
    l.lanes = jl.value("lanes", 1);
    l.saturation_flow = jl.at("saturation_flow_vps").get<double>();
    l.free_flow_speed = jl.at("free_flow_speed_mps").get<double>();
    l.region = jl.at("region").get<std::string>();
    l.is_origin = jl.value("is_origin", false);
    l.is_destination = jl.value("is_destination", false);
    spec.links.push_back(std::move(l));
  }
  for (const auto& jn : j.at("nodes")) {
    net::NodeSpec n;
    n.id = jn.at("id").get<std::string>();
    n.cycle_s = jn.at("cycle_s").get<int>();
    n.lost_time_s = jn.at("lost_time_s").get<int>();
    n.offset_s = jn.value("offset_s", 0);
    for (const auto& jp : jn.at("phases")) {
      net::PhaseSpec p;
      p.id = jp.at("id").get<std::string>();
      p.fixed_green_s = jp.at("fixed_green_s").get<int>();
      p.min_green_s = jp.value("min_green_s", 7);
      for (const auto& ja : jp.at("approaches")) {
        p.approaches.emplace_back(ja.at(0).get<std::string>(),
                                  ja.at(1).get<std::string>());
      }
      n.phases.push_back(std::move(p));
    }
    spec.nodes.push_back(std::move(n));
  }
  if (j.contains("connections")) {
    for (const auto& jc : j.at("connections")) {
      spec.unsignalized_connections.emplace_back(jc.at(0).get<std::string>(),
                                                 jc.at(1).get<std::string>());
    }
  }
  const json& jp = j.at("partition");
  spec.partition.regions = jp.at("regions").get<std::vector<std::string>>();
  if (jp.contains("boundary_groups")) {
    for (const auto& jg : jp.at("boundary_groups")) {
      net::BoundaryGroupSpec g;
      g.from_region = jg.at("from").get<std::string>();
      g.to_region = jg.at("to").get<std::string>();
      for (const auto& jb : jg.at("nodes")) {
        g.nodes.push_back({jb.at("node").get<std::string>(),
                           jb.at("primary_phase").get<std::string>(),
                           jb.at("secondary_phase").get<std::string>()});
      }
      spec.partition.boundary_groups.push_back(std::move(g));
    }
  }
  if (jp.contains("external_entries")) {
    for (const auto& [region, links] : jp.at("external_entries").items()) {
      spec.partition.external_entries[region] =
          links.get<std::vector<std::string>>();
    }
  }
  return spec;
}

}  // namespace

net::NetworkSpec load_network_spec(const std::string& path) {
  return network_from_json(json::parse(read_file(path)));
}

void save_network_spec(const net::NetworkSpec& spec, const std::string& path) {
  write_file(path, to_json(spec).dump(1) + "\n");
}

DemandSpec load_demand(const std::string& path) {
  const json j = json::parse(read_file(path));
  DemandSpec d;
  for (const auto& je : j.at("entries")) {
    d.entries.push_back({je.at("origin").get<std::string>(),
                         je.at("destination").get<std::string>(),
                         je.at("rate_vph").get<double>(),
                         je.at("start_s").get<double>(),
                         je.at("end_s").get<double>()});
  }
  return d;
}

void save_demand(const DemandSpec& demand, const std::string& path) {
  json j;
  j["entries"] = json::array();
  for (const auto& e : demand.entries) {
    j["entries"].push_back(json{{"origin", e.origin},
                                {"destination", e.destination},
                                {"rate_vph", e.rate_vph},
                                {"start_s", e.start_s},
                                {"end_s", e.end_s}});
  }
  write_file(path, j.dump(1) + "\n");
}

}  // namespace mesosim::io
