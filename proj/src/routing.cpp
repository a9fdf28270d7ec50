#include "mesosim/routing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

#include "mesosim/kernels.hpp"

namespace mesosim::routing {

std::vector<double> estimate_link_speeds(const net::Network& net,
                                         std::span<const double> outflow_sum,
                                         std::span<const double> queue_sum,
                                         double step_s, double v_min) {
  std::vector<double> v(net.n_links());
  kernels::link_speeds(outflow_sum.data(), queue_sum.data(), net.length.data(),
                       net.vff.data(), v_min, 1.0 / step_s, v.data(),
                       net.n_links());
  return v;
}

namespace {

net::ConnIdx conn_between(const net::Network& net, net::LinkIdx a,
                          net::LinkIdx b) {
  for (net::ConnIdx c = net.link_conn_begin[a]; c < net.link_conn_begin[a + 1];
       ++c) {
    if (net.connections[c].to == b) return c;
  }
  throw std::logic_error("path uses a movement that does not exist");
}

struct PathSearch {
  std::vector<double> dist;  // time to finish traversing each link
  std::vector<net::LinkIdx> pred;

  // Dijkstra over the link graph; cost of a link is its traversal time and
  // dist[z] is the time at which a trip entering `source` now exits z.
  // Deterministic: the heap orders ties by link index and relaxations improve
  // only on strictly smaller distance.
  void run(const net::Network& net, std::span<const double> travel_time,
           net::LinkIdx source) {
    dist.assign(net.n_links(), std::numeric_limits<double>::infinity());
    pred.assign(net.n_links(), net::kNone);
    using Item = std::pair<double, net::LinkIdx>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[source] = travel_time[source];
    heap.push({dist[source], source});
    while (!heap.empty()) {
      const auto [d, z] = heap.top();
      heap.pop();
      if (d > dist[z]) continue;
      for (const net::Connection& cn : net.connections_from(z)) {
        const double nd = d + travel_time[cn.to];
        if (nd < dist[cn.to]) {
          dist[cn.to] = nd;
          pred[cn.to] = z;
          heap.push({nd, cn.to});
        }
      }
    }
  }

  std::vector<net::LinkIdx> path_to(net::LinkIdx dest) const {
    std::vector<net::LinkIdx> p;
    for (net::LinkIdx z = dest; z != net::kNone; z = pred[z]) p.push_back(z);
    std::reverse(p.begin(), p.end());
    return p;
  }
};

}  // namespace

UpdateResult update_turn_ratios(const net::Network& net,
                                std::span<const OdVolume> demand,
                                std::span<const TripStackEntry> ongoing,
                                std::span<const double> speed,
                                const net::TurnRatioTable& previous,
                                double window_s) {
  if (speed.size() != net.n_links()) {
    throw std::invalid_argument("speed vector does not match network");
  }
  std::vector<double> travel_time(net.n_links());
  for (std::size_t z = 0; z < net.n_links(); ++z) {
    if (speed[z] <= 0.0) throw std::invalid_argument("non-positive speed");
    travel_time[z] = net.length[z] / speed[z];
  }

  // merge ongoing trips with the window demand, grouped by origin so each
  // origin needs a single shortest-path tree
  struct Trip {
    net::LinkIdx origin, destination;
    double volume;
  };
  std::vector<Trip> trips;
  trips.reserve(demand.size() + ongoing.size());
  for (const OdVolume& d : demand) {
    if (d.volume < 0.0) throw std::invalid_argument("negative trip volume");
    if (d.volume > 0.0) trips.push_back({d.origin, d.destination, d.volume});
  }
  for (const TripStackEntry& t : ongoing) {
    if (t.volume < 0.0) throw std::invalid_argument("negative trip volume");
    if (t.volume > 0.0) trips.push_back({t.origin, t.destination, t.volume});
  }
  std::stable_sort(trips.begin(), trips.end(), [](const Trip& a, const Trip& b) {
    return std::tie(a.origin, a.destination) < std::tie(b.origin, b.destination);
  });

  std::vector<double> counter(net.connections.size(), 0.0);
  std::vector<double> termination(net.n_links(), 0.0);

  UpdateResult result;
  PathSearch search;
  std::size_t i = 0;
  while (i < trips.size()) {
    std::size_t j = i;
    while (j < trips.size() && trips[j].origin == trips[i].origin) ++j;
    search.run(net, travel_time, trips[i].origin);
    for (std::size_t q = i; q < j; ++q) {
      const Trip& trip = trips[q];
      if (!std::isfinite(search.dist[trip.destination])) {
        result.dropped_volume += trip.volume;
        continue;
      }
      const std::vector<net::LinkIdx> path = search.path_to(trip.destination);
      if (search.dist[trip.destination] <= window_s) {
        for (std::size_t h = 0; h + 1 < path.size(); ++h) {
          counter[conn_between(net, path[h], path[h + 1])] += trip.volume;
        }
        termination[trip.destination] += trip.volume;
        result.completed_volume += trip.volume;
        continue;
      }
      // Split: the trip sits inside the first link it cannot finish within
      // the window. Connections up to that link were crossed and counted.
      std::size_t split = 0;
      while (search.dist[path[split]] <= window_s) ++split;
      for (std::size_t h = 0; h < split; ++h) {
        counter[conn_between(net, path[h], path[h + 1])] += trip.volume;
      }
      const double entered_at = split == 0 ? 0.0 : search.dist[path[split - 1]];
      result.stack.push_back({path[split], trip.destination, trip.volume,
                              window_s - entered_at});
    }
    i = j;
  }

  // ratios from the counters; rows nothing traversed keep their old values
  result.ratios = previous;
  if (result.ratios.beta.size() != net.connections.size()) {
    result.ratios = net::TurnRatioTable::uniform(net);
  }
  for (std::size_t z = 0; z < net.n_links(); ++z) {
    double row = 0.0;
    for (net::ConnIdx c = net.link_conn_begin[z]; c < net.link_conn_begin[z + 1];
         ++c) {
      row += counter[c];
    }
    if (row > 0.0) {
      for (net::ConnIdx c = net.link_conn_begin[z];
           c < net.link_conn_begin[z + 1]; ++c) {
        result.ratios.beta[c] = counter[c] / row;
      }
    }
    const double through = row + termination[z];
    if (through > 0.0) {
      result.ratios.ending[z] = termination[z] / through;
    }
  }
  return result;
}

}  // namespace mesosim::routing
