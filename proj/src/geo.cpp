#include "poirank/geo.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"
#include "poirank/rng.hpp"

namespace poirank {

using nlohmann::json;

bool geo_point_valid(const GeoPoint& p) {
  return std::isfinite(p.lat_deg) && std::isfinite(p.lon_deg) && p.lat_deg >= -90.0 &&
         p.lat_deg <= 90.0 && p.lon_deg >= -180.0 && p.lon_deg <= 180.0;
}

char poi_type_char(PoiType t) { return static_cast<char>(t); }

PoiType poi_type_from_char(char c) {
  switch (c) {
    case 'R': return PoiType::Restaurant;
    case 'A': return PoiType::Attraction;
    case 'H': return PoiType::Hotel;
    default: throw std::runtime_error(std::string("unknown poi_type '") + c + "'");
  }
}

size_t Catalog::total_entities() const {
  size_t n = 0;
  for (const auto& [_, entities] : cities) n += entities.size();
  return n;
}

std::vector<const Entity*> Catalog::universe(const std::string& city_id, PoiType t) const {
  std::vector<const Entity*> out;
  auto it = cities.find(city_id);
  if (it == cities.end()) return out;
  for (const Entity& e : it->second) {
    if (e.poi_type == t) out.push_back(&e);
  }
  return out;
}

const Entity* Catalog::find(const std::string& entity_id) const {
  auto it = index_.find(entity_id);
  return it == index_.end() ? nullptr : it->second;
}

void Catalog::rebuild_index() {
  index_.clear();
  for (const auto& [_, entities] : cities) {
    for (const Entity& e : entities) index_.emplace(e.id, &e);
  }
}

namespace {

const char* kSyllables[] = {"ba", "co", "da", "fe",  "go", "hi", "jo", "ka", "lu", "ma",
                            "no", "pe", "qui", "ro", "sa", "ti", "ur", "ve", "wi", "zo"};
constexpr size_t kNumSyllables = sizeof(kSyllables) / sizeof(kSyllables[0]);

// One name token: two syllables, first letter capitalized for display.
std::string name_token(Rng& rng) {
  std::string t = kSyllables[rng.uniform_int(kNumSyllables)];
  t += kSyllables[rng.uniform_int(kNumSyllables)];
  t[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(t[0])));
  return t;
}

std::string entity_name(Rng& rng) {
  size_t n_tokens = 2 + rng.uniform_int(2);
  std::string name = name_token(rng);
  for (size_t i = 1; i < n_tokens; ++i) {
    name += ' ';
    name += name_token(rng);
  }
  return name;
}

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

}  // namespace

Catalog generate_catalog(const CatalogConfig& config) {
  if (config.n_cities < 1) throw std::invalid_argument("generate_catalog: n_cities must be >= 1");
  if (config.min_city_size < 10 || config.max_city_size > 16200 ||
      config.min_city_size > config.max_city_size) {
    throw std::invalid_argument(
        "generate_catalog: size range must lie within [10, 16200] and be non-empty");
  }

  Catalog catalog;
  catalog.generation_seed = config.seed;
  Rng rng(mix_seed(config.seed, fnv1a64("catalog")));

  double log_lo = std::log(static_cast<double>(config.min_city_size));
  double log_hi = std::log(static_cast<double>(config.max_city_size) + 1.0);

  for (int c = 0; c < config.n_cities; ++c) {
    char city_id[16];
    std::snprintf(city_id, sizeof(city_id), "c%03d", c);

    GeoPoint center{rng.uniform(-55.0, 55.0), rng.uniform(-150.0, 150.0)};
    auto size = static_cast<int>(std::floor(std::exp(rng.uniform(log_lo, log_hi))));
    size = std::clamp(size, config.min_city_size, config.max_city_size);

    // Skewed per-city type mix so large cities produce large single-type
    // universes (spreads questions across all universe-size buckets).
    double type_weight[3];
    double weight_sum = 0.0;
    for (double& w : type_weight) {
      w = -std::log(1.0 - rng.uniform01());
      weight_sum += w;
    }
    for (double& w : type_weight) w /= weight_sum;

    std::vector<Entity> entities;
    entities.reserve(size);
    int type_counter[3] = {0, 0, 0};
    for (int i = 0; i < size; ++i) {
      double u = rng.uniform01();
      int t = u < type_weight[0] ? 0 : (u < type_weight[0] + type_weight[1] ? 1 : 2);
      Entity e;
      e.city_id = city_id;
      e.poi_type = kPoiTypes[t];
      char id[32];
      std::snprintf(id, sizeof(id), "%s_%c_%05d", city_id, poi_type_char(e.poi_type),
                    type_counter[t]++);
      e.id = id;
      e.name = entity_name(rng);
      e.location.lat_deg = std::clamp(center.lat_deg + rng.normal(0.0, 0.05), -90.0, 90.0);
      e.location.lon_deg = std::clamp(center.lon_deg + rng.normal(0.0, 0.05), -180.0, 180.0);
      entities.push_back(std::move(e));
    }
    std::sort(entities.begin(), entities.end(),
              [](const Entity& a, const Entity& b) { return a.id < b.id; });
    catalog.cities.emplace(city_id, std::move(entities));
  }
  catalog.rebuild_index();
  return catalog;
}

void save_catalog(const Catalog& catalog, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_catalog: cannot open " + path);
  char num[32];
  for (const auto& [_, entities] : catalog.cities) {
    for (const Entity& e : entities) {
      out << "{\"id\":\"" << json_escape(e.id) << "\",\"name\":\"" << json_escape(e.name)
          << "\",\"city_id\":\"" << json_escape(e.city_id) << "\",\"poi_type\":\""
          << poi_type_char(e.poi_type) << "\"";
      std::snprintf(num, sizeof(num), "%.17g", e.location.lat_deg);
      out << ",\"lat\":" << num;
      std::snprintf(num, sizeof(num), "%.17g", e.location.lon_deg);
      out << ",\"lon\":" << num << "}\n";
    }
  }
  if (!out) throw std::runtime_error("save_catalog: write failed for " + path);
}

Catalog load_catalog(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_catalog: cannot open " + path);

  Catalog catalog;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("load_catalog: line " + std::to_string(line_no) +
                               ": invalid JSON: " + e.what());
    }
    auto field = [&](const char* name) -> const json& {
      auto it = j.find(name);
      if (it == j.end()) {
        throw std::runtime_error("load_catalog: line " + std::to_string(line_no) +
                                 ": missing field '" + name + "'");
      }
      return *it;
    };
    Entity e;
    try {
      e.id = field("id").get<std::string>();
      e.name = field("name").get<std::string>();
      e.city_id = field("city_id").get<std::string>();
      std::string t = field("poi_type").get<std::string>();
      if (t.size() != 1) throw std::runtime_error("poi_type must be a single character");
      e.poi_type = poi_type_from_char(t[0]);
      e.location.lat_deg = field("lat").get<double>();
      e.location.lon_deg = field("lon").get<double>();
    } catch (const json::exception& ex) {
      throw std::runtime_error("load_catalog: line " + std::to_string(line_no) +
                               ": bad field type: " + ex.what());
    }
    if (e.name.empty()) {
      throw std::runtime_error("load_catalog: entity " + e.id + ": empty name");
    }
    if (!geo_point_valid(e.location)) {
      throw std::runtime_error("load_catalog: entity " + e.id + ": lat/lon (" +
                               std::to_string(e.location.lat_deg) + ", " +
                               std::to_string(e.location.lon_deg) + ") out of range");
    }
    if (!seen_ids.insert(e.id).second) {
      throw std::runtime_error("load_catalog: duplicate entity id " + e.id);
    }
    catalog.cities[e.city_id].push_back(std::move(e));
  }
  for (auto& [_, entities] : catalog.cities) {
    std::sort(entities.begin(), entities.end(),
              [](const Entity& a, const Entity& b) { return a.id < b.id; });
  }
  catalog.rebuild_index();
  return catalog;
}

}  // namespace poirank
