#include "voxelglass/spaces.hpp"

namespace vg::spaces {

std::string_view to_string(SpaceId id) {
  switch (id) {
    case SpaceId::World: return "World";
    case SpaceId::Sensor: return "Sensor";
    case SpaceId::Marker: return "Marker";
    case SpaceId::HandLeft: return "HandLeft";
    case SpaceId::HandRight: return "HandRight";
    case SpaceId::ViewLeft: return "ViewLeft";
    case SpaceId::ViewRight: return "ViewRight";
    case SpaceId::ViewPV: return "ViewPV";
  }
  return "World";
}

void SpaceGraph::set_edge(SpaceId child, SpaceId parent, const Pose& child_to_parent, double timestamp) {
  if (child == SpaceId::World) throw SpacesError(SpacesErrc::CycleDetected, "World has no parent");
  for (SpaceId p = parent; p != SpaceId::World;) {
    if (p == child) {
      throw SpacesError(SpacesErrc::CycleDetected,
                        std::string(to_string(child)) + " cannot be parented under its own descendant");
    }
    auto it = edges_.find(p);
    if (it == edges_.end()) break;
    p = it->second.parent;
  }
  edges_[child] = SpaceEdge{parent, child_to_parent, timestamp};
}

void SpaceGraph::remove(SpaceId id) { edges_.erase(id); }

const SpaceEdge* SpaceGraph::edge(SpaceId id) const {
  auto it = edges_.find(id);
  return it == edges_.end() ? nullptr : &it->second;
}

Pose SpaceGraph::to_world(SpaceId id) const {
  Pose acc;
  for (SpaceId cur = id; cur != SpaceId::World;) {
    auto it = edges_.find(cur);
    if (it == edges_.end()) {
      throw SpacesError(SpacesErrc::DisconnectedSpace,
                        std::string(to_string(id)) + " has no path to World (missing " +
                            std::string(to_string(cur)) + ")");
    }
    acc = compose(it->second.child_to_parent, acc);
    cur = it->second.parent;
  }
  return acc;
}

Pose SpaceGraph::resolve(SpaceId from, SpaceId to) const {
  for (SpaceId id : {from, to}) {
    if (!contains(id)) throw SpacesError(SpacesErrc::UnknownSpace, std::string(to_string(id)) + " is not registered");
  }
  if (from == to) return Pose::identity();
  return compose(invert(to_world(to)), to_world(from));
}

void update_marker_anchor(SpaceGraph& g, const Pose& marker_to_sensor, double timestamp, double weight) {
  const Pose candidate = compose(g.resolve(SpaceId::Sensor, SpaceId::World), marker_to_sensor);
  Pose anchored = candidate;
  if (g.contains(SpaceId::Marker)) anchored = blend(g.resolve(SpaceId::Marker, SpaceId::World), candidate, weight);
  g.set_edge(SpaceId::Marker, SpaceId::World, anchored, timestamp);
}

}  // namespace vg::spaces
