#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace poirank {

struct GeoPoint {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
};

bool geo_point_valid(const GeoPoint& p);

// Per-axis degree differences scaled to kilometers, longitude corrected by the
// cosine of the mean latitude. Small-area city-block approximation.
inline double manhattan_km(const GeoPoint& a, const GeoPoint& b) {
  constexpr double kKmPerDegree = 111.32;
  constexpr double kDegToRad = M_PI / 180.0;
  double mean_lat_rad = 0.5 * (a.lat_deg + b.lat_deg) * kDegToRad;
  return kKmPerDegree * std::fabs(a.lat_deg - b.lat_deg) +
         kKmPerDegree * std::cos(mean_lat_rad) * std::fabs(a.lon_deg - b.lon_deg);
}

enum class PoiType : char { Restaurant = 'R', Attraction = 'A', Hotel = 'H' };

inline constexpr PoiType kPoiTypes[3] = {PoiType::Restaurant, PoiType::Attraction,
                                         PoiType::Hotel};

char poi_type_char(PoiType t);
PoiType poi_type_from_char(char c);

struct Entity {
  std::string id;
  std::string name;
  std::string city_id;
  PoiType poi_type = PoiType::Restaurant;
  GeoPoint location;
};

struct CatalogConfig {
  int n_cities = 50;
  int min_city_size = 10;
  int max_city_size = 16200;
  uint64_t seed = 7;
};

class Catalog {
 public:
  // city_id -> entities sorted by id
  std::map<std::string, std::vector<Entity>> cities;
  uint64_t generation_seed = 0;

  size_t total_entities() const;

  // All entities of a (city, type) pair, the candidate universe questions are
  // ranked against. Pointers stay valid while the catalog is alive.
  std::vector<const Entity*> universe(const std::string& city_id, PoiType t) const;

  const Entity* find(const std::string& entity_id) const;

  void rebuild_index();

 private:
  std::map<std::string, const Entity*> index_;
};

Catalog generate_catalog(const CatalogConfig& config);

void save_catalog(const Catalog& catalog, const std::string& path);
Catalog load_catalog(const std::string& path);

}  // namespace poirank
