#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "guis/clients.hpp"
#include "guis/dbscan.hpp"
#include "guis/error.hpp"
#include "guis/geometry.hpp"
#include "json.hpp"

namespace guis {

enum class ElementClass {
  Text,
  Icon,
  Image,
  Button,
  CheckBox,
  EditText,
  Modal,
  Drawer,
  PageIndicator,
  Switch,
  Other,
};

inline constexpr std::array<std::pair<ElementClass, std::string_view>, 11> kElementClassNames{{
    {ElementClass::Text, "Text"},
    {ElementClass::Icon, "Icon"},
    {ElementClass::Image, "Image"},
    {ElementClass::Button, "Button"},
    {ElementClass::CheckBox, "CheckBox"},
    {ElementClass::EditText, "EditText"},
    {ElementClass::Modal, "Modal"},
    {ElementClass::Drawer, "Drawer"},
    {ElementClass::PageIndicator, "PageIndicator"},
    {ElementClass::Switch, "Switch"},
    {ElementClass::Other, "Other"},
}};

inline std::string_view to_string(ElementClass cls) {
  for (const auto& [c, name] : kElementClassNames)
    if (c == cls) return name;
  return "Other";
}

inline std::optional<ElementClass> try_parse_element_class(std::string_view label) {
  for (const auto& [c, name] : kElementClassNames)
    if (name == label) return c;
  if (label == "CheckedTextView") return ElementClass::CheckBox;
  return std::nullopt;
}

inline ElementClass parse_element_class(std::string_view label) {
  if (auto c = try_parse_element_class(label)) return *c;
  throw UnknownClass(std::string(label));
}

struct ImageSize {
  int width = 0;
  int height = 0;
  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

// One detector/OCR hit as it arrives on the wire.
struct RawDetection {
  std::string cls;
  BBox bbox;
  double confidence = 1.0;
  std::optional<std::string> text;
  friend bool operator==(const RawDetection&, const RawDetection&) = default;
};

struct DetectionSet {
  ImageSize image;
  std::vector<RawDetection> elements;
  friend bool operator==(const DetectionSet&, const DetectionSet&) = default;
};

struct GuiElement {
  int id = 0;
  ElementClass cls = ElementClass::Other;
  BBox bbox;
  std::string content;
  double confidence = 1.0;
  bool inferred = false;
  friend bool operator==(const GuiElement&, const GuiElement&) = default;
};

enum class Axis { Vertical, Horizontal };

inline std::string_view to_string(Axis a) { return a == Axis::Vertical ? "vertical" : "horizontal"; }

struct ListGroup {
  std::vector<int> member_ids;
  Axis axis = Axis::Vertical;
  double pitch = 0.0;
  friend bool operator==(const ListGroup&, const ListGroup&) = default;
};

struct GuiNode {
  GuiElement element;
  std::vector<GuiNode> children;
  friend bool operator==(const GuiNode&, const GuiNode&) = default;
};

struct GuiTree {
  std::vector<GuiNode> roots;
  friend bool operator==(const GuiTree&, const GuiTree&) = default;
};

struct ScreenDocument {
  GuiTree tree;
  std::vector<ListGroup> lists;
  ImageSize image_size;
  std::vector<std::string> warnings;
};

struct PerceptionConfig {
  double duplicate_iou = 0.5;
  // List clustering: features are (cx/W, cy/H, sqrt(area)/sqrt(W*H)).
  double list_eps = 0.08;
  std::size_t list_min_pts = 2;
  double size_tolerance = 0.5;
  double gap_tolerance = 0.1;
  double containment_threshold = 0.9;
  double cut_gap_fraction = 0.01;
  double cut_gap_min_px = 2.0;
};

// ---------------------------------------------------------------------------
// Wire format

inline void to_json(nlohmann::json& j, const RawDetection& d) {
  j = nlohmann::json{{"class", d.cls},
                     {"bbox", {d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max}},
                     {"confidence", d.confidence},
                     {"text", d.text ? nlohmann::json(*d.text) : nlohmann::json(nullptr)}};
}

inline void from_json(const nlohmann::json& j, RawDetection& d) {
  d.cls = j.at("class").get<std::string>();
  const auto& b = j.at("bbox");
  if (!b.is_array() || b.size() != 4) throw FormatError("bbox must be an array of 4 numbers");
  d.bbox = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
  d.confidence = j.value("confidence", 1.0);
  d.text.reset();
  if (auto it = j.find("text"); it != j.end() && !it->is_null()) d.text = it->get<std::string>();
}

inline void to_json(nlohmann::json& j, const DetectionSet& s) {
  j = nlohmann::json{{"image", {{"width", s.image.width}, {"height", s.image.height}}},
                     {"elements", s.elements}};
}

inline void from_json(const nlohmann::json& j, DetectionSet& s) {
  const auto& img = j.at("image");
  s.image = {img.at("width").get<int>(), img.at("height").get<int>()};
  if (s.image.width <= 0 || s.image.height <= 0) throw FormatError("image size must be positive");
  s.elements = j.at("elements").get<std::vector<RawDetection>>();
}

inline DetectionSet parse_detections(std::string_view text) {
  try {
    return nlohmann::json::parse(text).get<DetectionSet>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("detections: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Normalization

/// Clips boxes to the image, drops boxes that end up empty, suppresses
/// same-class duplicates (IoU above the threshold, higher confidence wins) and
/// sorts by (y_min, x_min, confidence desc). Ids are the resulting positions.
inline std::vector<GuiElement> normalize_detections(const std::vector<RawDetection>& raw, ImageSize size,
                                                    const PerceptionConfig& cfg = {}) {
  struct Candidate {
    GuiElement element;
    std::size_t source;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& r = raw[i];
    const ElementClass cls = parse_element_class(r.cls);
    const BBox& b = r.bbox;
    if (!std::isfinite(b.x_min) || !std::isfinite(b.y_min) || !std::isfinite(b.x_max) ||
        !std::isfinite(b.y_max))
      throw FormatError("detection " + std::to_string(i) + " has a non-finite bbox");
    BBox ordered{std::min(b.x_min, b.x_max), std::min(b.y_min, b.y_max), std::max(b.x_min, b.x_max),
                 std::max(b.y_min, b.y_max)};
    BBox clipped = clip(ordered, size.width, size.height);
    if (clipped.area() <= 0.0) continue;
    const double conf = std::isfinite(r.confidence) ? std::clamp(r.confidence, 0.0, 1.0) : 0.0;
    candidates.push_back({GuiElement{0, cls, clipped, r.text.value_or(""), conf, false}, i});
  }

  std::vector<std::size_t> by_conf(candidates.size());
  std::iota(by_conf.begin(), by_conf.end(), 0);
  std::stable_sort(by_conf.begin(), by_conf.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].element.confidence > candidates[b].element.confidence;
  });
  std::vector<Candidate> kept;
  for (std::size_t idx : by_conf) {
    const auto& c = candidates[idx];
    const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](const Candidate& k) {
      return k.element.cls == c.element.cls && iou(k.element.bbox, c.element.bbox) > cfg.duplicate_iou;
    });
    if (!duplicate) kept.push_back(c);
  }

  std::sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) {
    const auto& ea = a.element;
    const auto& eb = b.element;
    if (ea.bbox.y_min != eb.bbox.y_min) return ea.bbox.y_min < eb.bbox.y_min;
    if (ea.bbox.x_min != eb.bbox.x_min) return ea.bbox.x_min < eb.bbox.x_min;
    if (ea.confidence != eb.confidence) return ea.confidence > eb.confidence;
    return a.source < b.source;
  });

  std::vector<GuiElement> out;
  out.reserve(kept.size());
  for (auto& k : kept) {
    k.element.id = static_cast<int>(out.size());
    out.push_back(std::move(k.element));
  }
  return out;
}

// ---------------------------------------------------------------------------
// List recognition

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

inline double along(const BBox& b, Axis axis) { return axis == Axis::Vertical ? b.center().y : b.center().x; }
inline double across(const BBox& b, Axis axis) { return axis == Axis::Vertical ? b.center().x : b.center().y; }

}  // namespace detail

struct ListClustering {
  std::vector<ListGroup> groups;
  std::vector<GuiElement> elements;
};

/// Finds list-like runs of same-class elements with DBSCAN over normalized
/// position and size, then repairs each run: members whose size is off the
/// run median by more than the tolerance are relabelled Other and leave the
/// group, and a single missing item is synthesized where two neighbours sit
/// about two pitches apart.
inline ListClustering cluster_lists(std::vector<GuiElement> elements, ImageSize size,
                                    const PerceptionConfig& cfg = {}) {
  ListClustering result;
  const double w = std::max(1, size.width);
  const double h = std::max(1, size.height);
  const double diag = std::sqrt(w * h);
  int next_id = 0;
  for (const auto& e : elements) next_id = std::max(next_id, e.id + 1);
  std::vector<GuiElement> synthesized;
  std::vector<bool> demoted(elements.size(), false);

  for (const auto& [cls, name] : kElementClassNames) {
    std::vector<std::size_t> members;
    std::vector<std::vector<double>> features;
    for (std::size_t i = 0; i < elements.size(); ++i) {
      const auto& e = elements[i];
      if (e.cls != cls || e.inferred || demoted[i]) continue;
      members.push_back(i);
      const Point c = e.bbox.center();
      features.push_back({c.x / w, c.y / h, std::sqrt(e.bbox.area()) / diag});
    }
    if (members.size() < 2) continue;
    const std::vector<int> labels = dbscan(features, cfg.list_eps, cfg.list_min_pts);
    const int clusters = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;

    for (int cluster = 0; cluster < clusters; ++cluster) {
      std::vector<std::size_t> run;
      for (std::size_t k = 0; k < members.size(); ++k)
        if (labels[k] == cluster) run.push_back(members[k]);
      if (run.size() < 2) continue;

      std::vector<double> widths, heights;
      for (auto i : run) {
        widths.push_back(elements[i].bbox.width());
        heights.push_back(elements[i].bbox.height());
      }
      const double mw = detail::median(widths);
      const double mh = detail::median(heights);
      std::vector<std::size_t> sized;
      for (auto i : run) {
        const auto& b = elements[i].bbox;
        if (std::abs(b.width() - mw) > cfg.size_tolerance * mw ||
            std::abs(b.height() - mh) > cfg.size_tolerance * mh) {
          elements[i].cls = ElementClass::Other;
          demoted[i] = true;
        } else {
          sized.push_back(i);
        }
      }
      if (sized.size() < 2) continue;

      double min_x = INFINITY, max_x = -INFINITY, min_y = INFINITY, max_y = -INFINITY;
      for (auto i : sized) {
        const Point c = elements[i].bbox.center();
        min_x = std::min(min_x, c.x);
        max_x = std::max(max_x, c.x);
        min_y = std::min(min_y, c.y);
        max_y = std::max(max_y, c.y);
      }
      const Axis axis = (max_y - min_y) >= (max_x - min_x) ? Axis::Vertical : Axis::Horizontal;

      std::vector<double> cross;
      for (auto i : sized) cross.push_back(detail::across(elements[i].bbox, axis));
      const double cross_median = detail::median(cross);
      const double cross_extent = axis == Axis::Vertical ? mw : mh;
      std::vector<std::size_t> aligned;
      for (auto i : sized)
        if (std::abs(detail::across(elements[i].bbox, axis) - cross_median) <= 0.5 * cross_extent)
          aligned.push_back(i);
      if (aligned.size() < 2) continue;

      std::stable_sort(aligned.begin(), aligned.end(), [&](std::size_t a, std::size_t b) {
        return detail::along(elements[a].bbox, axis) < detail::along(elements[b].bbox, axis);
      });
      std::vector<double> steps;
      for (std::size_t k = 1; k < aligned.size(); ++k)
        steps.push_back(detail::along(elements[aligned[k]].bbox, axis) -
                        detail::along(elements[aligned[k - 1]].bbox, axis));
      const double pitch = detail::median(steps);
      if (!(pitch > 0.0)) continue;

      ListGroup group{{}, axis, pitch};
      for (std::size_t k = 0; k < aligned.size(); ++k) {
        if (k > 0) {
          const double gap = steps[k - 1];
          if (std::abs(gap - 2.0 * pitch) <= cfg.gap_tolerance * 2.0 * pitch) {
            const double pos = detail::along(elements[aligned[k - 1]].bbox, axis) + pitch;
            const double cx = axis == Axis::Vertical ? cross_median : pos;
            const double cy = axis == Axis::Vertical ? pos : cross_median;
            GuiElement filler{next_id++,
                              cls,
                              BBox{cx - mw / 2.0, cy - mh / 2.0, cx + mw / 2.0, cy + mh / 2.0},
                              "",
                              0.0,
                              true};
            group.member_ids.push_back(filler.id);
            synthesized.push_back(std::move(filler));
          }
        }
        group.member_ids.push_back(elements[aligned[k]].id);
      }
      result.groups.push_back(std::move(group));
    }
  }

  elements.insert(elements.end(), synthesized.begin(), synthesized.end());
  result.elements = std::move(elements);
  return result;
}

// ---------------------------------------------------------------------------
// Hierarchy

/// Parent of e is the smallest strictly larger element covering at least
/// `threshold` of e's area; ties on area go to the lower index.
inline std::vector<std::optional<std::size_t>> parent_indices(const std::vector<GuiElement>& elements,
                                                              double threshold = 0.9) {
  std::vector<std::optional<std::size_t>> parent(elements.size());
  for (std::size_t i = 0; i < elements.size(); ++i) {
    const BBox& child = elements[i].bbox;
    for (std::size_t j = 0; j < elements.size(); ++j) {
      if (j == i) continue;
      const BBox& p = elements[j].bbox;
      if (!(p.area() > child.area())) continue;
      if (containment_ratio(child, p) < threshold) continue;
      if (!parent[i] || p.area() < elements[*parent[i]].bbox.area()) parent[i] = j;
    }
  }
  return parent;
}

inline GuiTree build_hierarchy(const std::vector<GuiElement>& elements, double threshold = 0.9) {
  const auto parent = parent_indices(elements, threshold);
  std::vector<std::vector<std::size_t>> children(elements.size());
  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < elements.size(); ++i) {
    if (parent[i])
      children[*parent[i]].push_back(i);
    else
      roots.push_back(i);
  }
  // Parents are strictly larger than their children, so this recursion is a
  // finite walk down a forest.
  std::function<GuiNode(std::size_t)> make = [&](std::size_t i) {
    GuiNode node{elements[i], {}};
    for (auto c : children[i]) node.children.push_back(make(c));
    return node;
  };
  GuiTree tree;
  for (auto r : roots) tree.roots.push_back(make(r));
  return tree;
}

// ---------------------------------------------------------------------------
// Reading order

namespace detail {

struct Band {
  std::vector<std::size_t> items;
};

// Maximal empty gaps of the projection of `items` onto one axis that are at
// least `threshold` wide. Returns the bands between them and the widest gap.
inline std::pair<std::vector<Band>, double> split_on_axis(const std::vector<GuiElement>& els,
                                                          const std::vector<std::size_t>& items, bool by_y,
                                                          const PerceptionConfig& cfg) {
  auto lo = [&](std::size_t i) { return by_y ? els[i].bbox.y_min : els[i].bbox.x_min; };
  auto hi = [&](std::size_t i) { return by_y ? els[i].bbox.y_max : els[i].bbox.x_max; };
  std::vector<std::size_t> sorted = items;
  std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) { return lo(a) < lo(b); });

  double extent_lo = INFINITY, extent_hi = -INFINITY;
  for (auto i : items) {
    extent_lo = std::min(extent_lo, lo(i));
    extent_hi = std::max(extent_hi, hi(i));
  }
  const double threshold = std::max(cfg.cut_gap_min_px, cfg.cut_gap_fraction * (extent_hi - extent_lo));

  std::vector<Band> bands(1);
  double widest = 0.0;
  double run_end = -INFINITY;
  for (auto i : sorted) {
    if (!bands.back().items.empty()) {
      const double gap = lo(i) - run_end;
      if (gap > 0.0 && gap >= threshold) {
        widest = std::max(widest, gap);
        bands.emplace_back();
      }
    }
    bands.back().items.push_back(i);
    run_end = std::max(run_end, hi(i));
  }
  return {std::move(bands), widest};
}

inline void xy_cut(const std::vector<GuiElement>& els, std::vector<std::size_t> items, const PerceptionConfig& cfg,
                   std::vector<std::size_t>& out) {
  if (items.size() <= 1) {
    out.insert(out.end(), items.begin(), items.end());
    return;
  }
  auto [rows, row_gap] = split_on_axis(els, items, true, cfg);
  auto [cols, col_gap] = split_on_axis(els, items, false, cfg);
  if (rows.size() < 2 && cols.size() < 2) {
    std::stable_sort(items.begin(), items.end(), [&](std::size_t a, std::size_t b) {
      const auto& ea = els[a];
      const auto& eb = els[b];
      if (ea.bbox.y_min != eb.bbox.y_min) return ea.bbox.y_min < eb.bbox.y_min;
      if (ea.bbox.x_min != eb.bbox.x_min) return ea.bbox.x_min < eb.bbox.x_min;
      return ea.id < eb.id;
    });
    out.insert(out.end(), items.begin(), items.end());
    return;
  }
  const auto& bands = (rows.size() >= 2 && row_gap >= col_gap) || cols.size() < 2 ? rows : cols;
  for (const auto& band : bands) xy_cut(els, band.items, cfg, out);
}

}  // namespace detail

/// Recursive XY-cut: split along the axis with the widest projection gap
/// (rows win ties), recurse into each band top-to-bottom or left-to-right,
/// and fall back to (y_min, x_min, id) order when nothing can be cut.
inline std::vector<GuiElement> xy_cut_order(const std::vector<GuiElement>& siblings,
                                            const PerceptionConfig& cfg = {}) {
  std::vector<std::size_t> items(siblings.size());
  std::iota(items.begin(), items.end(), 0);
  std::vector<std::size_t> order;
  order.reserve(items.size());
  detail::xy_cut(siblings, std::move(items), cfg, order);
  std::vector<GuiElement> out;
  out.reserve(order.size());
  for (auto i : order) out.push_back(siblings[i]);
  return out;
}

namespace detail {

inline void order_level(std::vector<GuiNode>& nodes, const PerceptionConfig& cfg) {
  std::vector<GuiElement> els;
  els.reserve(nodes.size());
  for (const auto& n : nodes) els.push_back(n.element);
  std::vector<std::size_t> items(nodes.size());
  std::iota(items.begin(), items.end(), 0);
  std::vector<std::size_t> order;
  xy_cut(els, std::move(items), cfg, order);
  std::vector<GuiNode> sorted;
  sorted.reserve(nodes.size());
  for (auto i : order) sorted.push_back(std::move(nodes[i]));
  nodes = std::move(sorted);
  for (auto& n : nodes) order_level(n.children, cfg);
}

inline void renumber(std::vector<GuiNode>& nodes, int& next, std::map<int, int>& remap) {
  for (auto& n : nodes) {
    remap[n.element.id] = next;
    n.element.id = next++;
    renumber(n.children, next, remap);
  }
}

}  // namespace detail

/// Applies xy_cut_order to every sibling set.
inline GuiTree order_tree(GuiTree tree, const PerceptionConfig& cfg = {}) {
  detail::order_level(tree.roots, cfg);
  return tree;
}

/// Pre-order ids 0..n-1. `remap`, when given, receives old id -> new id.
inline GuiTree assign_ids(GuiTree tree, std::map<int, int>* remap = nullptr) {
  std::map<int, int> local;
  int next = 0;
  detail::renumber(tree.roots, next, remap ? *remap : local);
  return tree;
}

// ---------------------------------------------------------------------------
// Document helpers

inline void for_each_node(const std::vector<GuiNode>& nodes, const std::function<void(const GuiNode&, int)>& fn,
                          int depth = 0) {
  for (const auto& n : nodes) {
    fn(n, depth);
    for_each_node(n.children, fn, depth + 1);
  }
}

inline std::vector<GuiElement> flatten(const GuiTree& tree) {
  std::vector<GuiElement> out;
  for_each_node(tree.roots, [&](const GuiNode& n, int) { out.push_back(n.element); });
  return out;
}

inline std::size_t node_count(const GuiTree& tree) {
  std::size_t n = 0;
  for_each_node(tree.roots, [&](const GuiNode&, int) { ++n; });
  return n;
}

inline std::optional<GuiElement> find_element(const ScreenDocument& doc, int id) {
  std::optional<GuiElement> found;
  for_each_node(doc.tree.roots, [&](const GuiNode& n, int) {
    if (!found && n.element.id == id) found = n.element;
  });
  return found;
}

/// Full perception pipeline: normalize, recognize lists, caption bare icons,
/// build the containment tree, order it for reading and number it.
inline ScreenDocument build_document(const DetectionSet& detections, IconCaptioner& captioner,
                                     const PerceptionConfig& cfg = {}, const Image* screenshot = nullptr) {
  ScreenDocument doc;
  doc.image_size = detections.image;
  auto elements = normalize_detections(detections.elements, detections.image, cfg);
  auto clustered = cluster_lists(std::move(elements), detections.image, cfg);
  elements = std::move(clustered.elements);

  for (auto& e : elements) {
    if (e.cls != ElementClass::Icon || !e.content.empty()) continue;
    try {
      e.content = captioner.caption(IconQuery{e.bbox, fingerprint(e.bbox), screenshot});
    } catch (const std::exception& ex) {
      doc.warnings.push_back("caption failed for element " + std::to_string(e.id) + ": " + ex.what());
      e.content.clear();
    }
  }

  std::map<int, int> remap;
  doc.tree = assign_ids(order_tree(build_hierarchy(elements, cfg.containment_threshold), cfg), &remap);
  for (auto& g : clustered.groups) {
    for (auto& id : g.member_ids) id = remap.at(id);
    doc.lists.push_back(std::move(g));
  }
  return doc;
}

}  // namespace guis
