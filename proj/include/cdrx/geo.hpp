#pragma once

#include "cdrx/core.hpp"
#include "cdrx/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <queue>
#include <tuple>
#include <utility>
#include <vector>

namespace cdrx {

inline constexpr double earth_radius_km = 6371.0;

inline constexpr double deg_to_rad(double d) { return d * std::numbers::pi / 180.0; }

/// Great-circle distance on a sphere of radius 6371 km.
inline double haversine_km(const GeoPoint& a, const GeoPoint& b) {
    if (a == b) return 0.0;
    double dlat = deg_to_rad(b.lat - a.lat);
    double dlon = deg_to_rad(b.lon - a.lon);
    double s1 = std::sin(dlat / 2.0);
    double s2 = std::sin(dlon / 2.0);
    double h = s1 * s1 + std::cos(deg_to_rad(a.lat)) * std::cos(deg_to_rad(b.lat)) * s2 * s2;
    h = std::min(1.0, h);
    return 2.0 * earth_radius_km * std::asin(std::sqrt(h));
}

/// A timestamped position, e.g. one call of a user.
struct Fix {
    Instant instant;
    GeoPoint loc;
};

/// Speed between two fixes in km/h; nullopt when the time difference is
/// zero (such samples carry no speed information and are skipped by
/// averages).
inline std::optional<double> speed_kmh(const Fix& a, const Fix& b) {
    auto dt = b.instant - a.instant;
    if (dt < 0) throw DataError("speed_kmh: fixes out of order");
    if (dt == 0) return std::nullopt;
    return haversine_km(a.loc, b.loc) / (static_cast<double>(dt) / 3600.0);
}

// ---------------------------------------------------------------------------
// Route graph and shortest paths.

struct RouteEdge {
    int a = 0;
    int b = 0;
    double km = 0.0;
};

/// Undirected geometric graph over call locations. `source` is the home
/// node, `target` the workplace node.
struct RouteGraph {
    std::vector<GeoPoint> nodes;
    std::vector<RouteEdge> edges;
    int source = 0;
    int target = 0;

    /// Adjacency lists `(neighbor, km)` ordered by neighbor index.
    std::vector<std::vector<std::pair<int, double>>> adjacency() const {
        std::vector<std::vector<std::pair<int, double>>> adj(nodes.size());
        for (const auto& e : edges) {
            adj[e.a].push_back({e.b, e.km});
            adj[e.b].push_back({e.a, e.km});
        }
        for (auto& l : adj) std::sort(l.begin(), l.end());
        return adj;
    }
};

namespace detail {

struct DisjointSets {
    std::vector<int> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (b < a) std::swap(a, b);
        parent[b] = a;
        return true;
    }
};

} // namespace detail

/// Builds the k-nearest-neighbour graph over `locs` plus home and work,
/// adding minimum-spanning-tree edges when k-NN leaves several components.
///
/// Node order: home first, the remaining locations in lexicographic order,
/// workplace last. Duplicate locations collapse.
inline RouteGraph build_route_graph(const std::vector<GeoPoint>& locs, const GeoPoint& home, const GeoPoint& work, int k) {
    if (k < 1) throw ConfigError("route graph neighbour count must be >= 1");
    if (home == work) throw DataError("route graph needs at least 2 distinct nodes");
    RouteGraph g;
    std::vector<GeoPoint> middle;
    for (const auto& p : locs)
        if (p != home && p != work) middle.push_back(p);
    std::sort(middle.begin(), middle.end());
    middle.erase(std::unique(middle.begin(), middle.end()), middle.end());
    g.nodes.push_back(home);
    g.nodes.insert(g.nodes.end(), middle.begin(), middle.end());
    g.nodes.push_back(work);
    g.source = 0;
    g.target = static_cast<int>(g.nodes.size()) - 1;

    const int n = static_cast<int>(g.nodes.size());
    std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) dist[i][j] = dist[j][i] = haversine_km(g.nodes[i], g.nodes[j]);

    std::vector<std::vector<char>> linked(n, std::vector<char>(n, 0));
    auto link = [&](int a, int b) {
        if (a == b || linked[a][b]) return;
        linked[a][b] = linked[b][a] = 1;
        g.edges.push_back({std::min(a, b), std::max(a, b), dist[a][b]});
    };
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int x, int y) { return std::pair{dist[i][x], x} < std::pair{dist[i][y], y}; });
        int taken = 0;
        for (int j : order) {
            if (j == i) continue;
            if (taken++ >= k) break;
            link(i, j);
        }
    }

    detail::DisjointSets sets(n);
    for (const auto& e : g.edges) sets.unite(e.a, e.b);
    std::vector<RouteEdge> candidates;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (!linked[i][j]) candidates.push_back({i, j, dist[i][j]});
    std::sort(candidates.begin(), candidates.end(), [](const RouteEdge& x, const RouteEdge& y) {
        return std::tuple{x.km, x.a, x.b} < std::tuple{y.km, y.a, y.b};
    });
    for (const auto& c : candidates)
        if (sets.unite(c.a, c.b)) link(c.a, c.b);

    std::sort(g.edges.begin(), g.edges.end(), [](const RouteEdge& x, const RouteEdge& y) {
        return std::pair{x.a, x.b} < std::pair{y.a, y.b};
    });
    return g;
}

struct Route {
    std::vector<int> nodes;
    std::vector<GeoPoint> points;
    double km = 0.0;
};

/// Dijkstra from `g.source` to `g.target`. Among equal-length paths the
/// predecessor with the smaller node index wins.
inline Route shortest_route(const RouteGraph& g) {
    const int n = static_cast<int>(g.nodes.size());
    if (n < 2 || g.source < 0 || g.target < 0 || g.source >= n || g.target >= n) throw DataError("no route");
    auto adj = g.adjacency();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(n, inf);
    std::vector<int> pred(n, -1);
    std::vector<char> done(n, 0);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[g.source] = 0.0;
    pq.push({0.0, g.source});
    while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (done[u]) continue;
        done[u] = 1;
        if (u == g.target) break;
        for (auto [v, w] : adj[u]) {
            if (done[v]) continue;
            double nd = d + w;
            if (nd < dist[v] || (nd == dist[v] && u < pred[v])) {
                dist[v] = nd;
                pred[v] = u;
                pq.push({nd, v});
            }
        }
    }
    if (dist[g.target] == inf) throw DataError("no route");
    Route r;
    r.km = dist[g.target];
    for (int v = g.target; v != -1; v = pred[v]) r.nodes.push_back(v);
    std::reverse(r.nodes.begin(), r.nodes.end());
    for (int v : r.nodes) r.points.push_back(g.nodes[v]);
    return r;
}

/// Sum of great-circle legs along a polyline.
inline double path_length_km(const std::vector<GeoPoint>& pts) {
    double km = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) km += haversine_km(pts[i - 1], pts[i]);
    return km;
}

// ---------------------------------------------------------------------------
// Voronoi tessellation.

struct BBox {
    double min_lat = 0.0;
    double min_lon = 0.0;
    double max_lat = 0.0;
    double max_lon = 0.0;

    bool contains(const GeoPoint& p) const {
        return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon && p.lon <= max_lon;
    }
    GeoPoint center() const { return {(min_lat + max_lat) / 2.0, (min_lon + max_lon) / 2.0}; }

    /// Smallest box containing `pts`, grown by `margin_deg` on every side.
    static BBox around(const std::vector<GeoPoint>& pts, double margin_deg) {
        if (pts.empty()) throw DataError("bounding box of an empty point set");
        BBox b{pts[0].lat, pts[0].lon, pts[0].lat, pts[0].lon};
        for (const auto& p : pts) {
            b.min_lat = std::min(b.min_lat, p.lat);
            b.max_lat = std::max(b.max_lat, p.lat);
            b.min_lon = std::min(b.min_lon, p.lon);
            b.max_lon = std::max(b.max_lon, p.lon);
        }
        b.min_lat -= margin_deg;
        b.min_lon -= margin_deg;
        b.max_lat += margin_deg;
        b.max_lon += margin_deg;
        return b;
    }
};

struct PlanePoint {
    double x = 0.0;
    double y = 0.0;
};

/// Equirectangular projection about a reference latitude/longitude, in km.
class LocalProjection {
public:
    explicit LocalProjection(GeoPoint origin)
        : origin_(origin), kx_(deg_to_rad(1.0) * earth_radius_km * std::cos(deg_to_rad(origin.lat))),
          ky_(deg_to_rad(1.0) * earth_radius_km) {}

    PlanePoint forward(const GeoPoint& p) const { return {(p.lon - origin_.lon) * kx_, (p.lat - origin_.lat) * ky_}; }
    GeoPoint inverse(const PlanePoint& q) const { return {origin_.lat + q.y / ky_, origin_.lon + q.x / kx_}; }

private:
    GeoPoint origin_;
    double kx_;
    double ky_;
};

using Polygon = std::vector<PlanePoint>;

/// Shoelace area, positive for counter-clockwise rings.
inline double signed_area(const Polygon& poly) {
    double a = 0.0;
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
        const auto& p = poly[i];
        const auto& q = poly[(i + 1) % n];
        a += p.x * q.y - q.x * p.y;
    }
    return a / 2.0;
}

/// Even-odd ray test; points on the boundary may land either way.
inline bool point_in_polygon(const Polygon& poly, PlanePoint p) {
    bool in = false;
    for (std::size_t i = 0, n = poly.size(), j = n - 1; i < n; j = i++) {
        const auto& a = poly[i];
        const auto& b = poly[j];
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) in = !in;
    }
    return in;
}

namespace detail {

/// Keeps the part of `poly` where `n·p <= c` (Sutherland–Hodgman, one edge).
inline Polygon clip_half_plane(const Polygon& poly, double nx, double ny, double c) {
    Polygon out;
    if (poly.empty()) return out;
    out.reserve(poly.size() + 1);
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
        const auto& p = poly[i];
        const auto& q = poly[(i + 1) % n];
        double fp = nx * p.x + ny * p.y - c;
        double fq = nx * q.x + ny * q.y - c;
        bool pin = fp <= 0.0;
        bool qin = fq <= 0.0;
        if (pin) out.push_back(p);
        if (pin != qin) {
            double t = fp / (fp - fq);
            out.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
        }
    }
    return out;
}

} // namespace detail

/// Cells of a Voronoi diagram clipped to a box. Cell `i` belongs to
/// `sites[i]`; rings are counter-clockwise in the projected plane and are
/// also available in lat/lon.
class VoronoiDiagram {
public:
    VoronoiDiagram(std::vector<GeoPoint> sites, BBox box, LocalProjection proj, std::vector<Polygon> cells)
        : sites_(std::move(sites)), box_(box), proj_(proj), cells_(std::move(cells)) {}

    const std::vector<GeoPoint>& sites() const { return sites_; }
    const BBox& box() const { return box_; }
    const LocalProjection& projection() const { return proj_; }
    const std::vector<Polygon>& plane_cells() const { return cells_; }
    std::size_t size() const { return sites_.size(); }

    std::vector<GeoPoint> cell(std::size_t i) const {
        std::vector<GeoPoint> ring;
        ring.reserve(cells_[i].size());
        for (const auto& q : cells_[i]) ring.push_back(proj_.inverse(q));
        return ring;
    }

    double cell_area_km2(std::size_t i) const { return std::abs(signed_area(cells_[i])); }

    double box_area_km2() const {
        auto a = proj_.forward({box_.min_lat, box_.min_lon});
        auto b = proj_.forward({box_.max_lat, box_.max_lon});
        return std::abs((b.x - a.x) * (b.y - a.y));
    }

    /// Index of the cell containing `p`, scanning cells in order.
    std::optional<std::size_t> locate(const GeoPoint& p) const {
        auto q = proj_.forward(p);
        for (std::size_t i = 0; i < cells_.size(); ++i)
            if (point_in_polygon(cells_[i], q)) return i;
        return std::nullopt;
    }

private:
    std::vector<GeoPoint> sites_;
    BBox box_;
    LocalProjection proj_;
    std::vector<Polygon> cells_;
};

/// Voronoi tessellation by half-plane clipping in an equirectangular plane
/// centred on the box. Sites are de-duplicated (sorted) first; sites outside
/// the box still clip their neighbours.
inline VoronoiDiagram voronoi(std::vector<GeoPoint> sites, const BBox& box) {
    if (sites.empty()) throw DataError("voronoi needs at least one site");
    if (!(box.max_lat > box.min_lat && box.max_lon > box.min_lon)) throw DataError("voronoi bounding box is empty");
    std::sort(sites.begin(), sites.end());
    sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
    LocalProjection proj(box.center());
    std::vector<PlanePoint> xy;
    xy.reserve(sites.size());
    for (const auto& s : sites) xy.push_back(proj.forward(s));
    auto lo = proj.forward({box.min_lat, box.min_lon});
    auto hi = proj.forward({box.max_lat, box.max_lon});
    const Polygon frame{{lo.x, lo.y}, {hi.x, lo.y}, {hi.x, hi.y}, {lo.x, hi.y}};

    const std::size_t n = sites.size();
    std::vector<Polygon> cells(n);
    std::vector<std::pair<double, std::size_t>> others;
    others.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = xy[i];
        others.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double dx = xy[j].x - s.x, dy = xy[j].y - s.y;
            others.push_back({dx * dx + dy * dy, j});
        }
        std::sort(others.begin(), others.end());
        Polygon cell = frame;
        for (const auto& [d2, j] : others) {
            // A site farther than twice the cell's radius cannot cut it.
            double r2 = 0.0;
            for (const auto& v : cell) {
                double dx = v.x - s.x, dy = v.y - s.y;
                r2 = std::max(r2, dx * dx + dy * dy);
            }
            if (d2 > 4.0 * r2) break;
            const auto& t = xy[j];
            double nx = t.x - s.x, ny = t.y - s.y;
            double c = (t.x * t.x + t.y * t.y - s.x * s.x - s.y * s.y) / 2.0;
            cell = detail::clip_half_plane(cell, nx, ny, c);
            if (cell.empty()) break;
        }
        cells[i] = std::move(cell);
    }
    return VoronoiDiagram(std::move(sites), box, proj, std::move(cells));
}

} // namespace cdrx
