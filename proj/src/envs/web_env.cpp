#include "tta/envs/web_env.hpp"

#include <algorithm>

#include "tta/errors.hpp"
#include "tta/util.hpp"

namespace tta::env {

namespace {

using json = nlohmann::json;

constexpr int kHeading = 1;
constexpr int kDestField = 2;
constexpr int kGo = 3;
constexpr int kDealsLink = 4;
constexpr int kTripsLink = 5;
constexpr int kHelpLink = 6;
constexpr int kNotice = 7;
constexpr int kHomeLink = 8;
constexpr int kDealsRange = 9;
constexpr int kDialog = 20;
constexpr int kFirstDate = 21;
constexpr int kFlightRow = 30;
constexpr int kBookButton = 40;
constexpr int kDealRow = 50;
constexpr int kHelpRow = 60;
constexpr int kTripRow = 70;

double price_value(const std::string& price) {
  return std::stod(price.substr(price.find_first_of("0123456789")));
}

std::string url_encode(const std::string& s) {
  std::string out;
  for (char c : s) out += (c == ' ') ? '+' : c;
  return out;
}

}  // namespace

WebEnv::WebEnv(Site site, std::vector<TaskSpec> tasks) : site_(std::move(site)), tasks_(std::move(tasks)) {}

std::unique_ptr<WebEnv> WebEnv::from_json(const json& fixture) {
  Site site;
  site.host = fixture.at("site").get<std::string>();
  site.description = fixture.at("description").get<std::string>();
  site.dates = fixture.at("dates").get<std::vector<std::string>>();
  for (const auto& [dest, list] : fixture.at("flights").items()) {
    std::vector<Flight> flights;
    for (const auto& f : list) {
      flights.push_back({f.at("code").get<std::string>(), f.at("time").get<std::string>(),
                         f.at("price").get<std::string>()});
    }
    site.flights.emplace_back(dest, std::move(flights));
  }
  for (const auto& d : fixture.at("deals")) {
    site.deals.push_back({d.at("title").get<std::string>(), d.at("price").get<std::string>()});
  }
  site.help = fixture.at("help").get<std::vector<std::string>>();
  site.trips = fixture.at("trips").get<std::vector<std::string>>();
  return std::make_unique<WebEnv>(std::move(site), parse_tasks(fixture.at("tasks")));
}

std::unique_ptr<Environment> WebEnv::fresh() const { return std::make_unique<WebEnv>(site_, tasks_); }

json WebEnv::State::to_json() const {
  static const char* kNames[] = {"home", "results", "booking", "deals", "help", "trips"};
  return json{{"page", kNames[static_cast<int>(page)]},
              {"dest_value", dest_value},
              {"modal_open", modal_open},
              {"notice", notice},
              {"query_dest", query_dest},
              {"query_date", query_date},
              {"deals_offset", deals_offset},
              {"booked", booked ? *booked : json(nullptr)}};
}

const std::vector<WebEnv::Flight>* WebEnv::flights_for(const std::string& dest) const {
  const std::string key = to_lower(trim(dest));
  for (const auto& [name, list] : site_.flights) {
    if (to_lower(name) == key) return &list;
  }
  return nullptr;
}

std::vector<WebEnv::Flight> WebEnv::sorted_flights(const std::string& dest) const {
  std::vector<Flight> out;
  if (const auto* list = flights_for(dest)) out = *list;
  std::stable_sort(out.begin(), out.end(),
                   [](const Flight& a, const Flight& b) { return price_value(a.price) < price_value(b.price); });
  return out;
}

std::string WebEnv::url(const State& s) const {
  const std::string root = "http://" + site_.host;
  switch (s.page) {
    case Page::Home: return root + "/";
    case Page::Results: return root + "/results?dest=" + url_encode(s.query_dest) + "&date=" + url_encode(s.query_date);
    case Page::Booking: return root + "/booking/" + s.booking_code;
    case Page::Deals: return root + "/deals";
    case Page::Help: return root + "/help";
    case Page::Trips: return root + "/trips";
  }
  return root;
}

std::vector<WebEnv::Element> WebEnv::page_elements(const State& s) const {
  std::vector<Element> els;
  switch (s.page) {
    case Page::Home:
      els.push_back({kHeading, "heading", "Travel Example: find your next flight", ""});
      els.push_back({kDestField, "textbox", "dest_field",
                     s.dest_value.empty() ? std::string{} : " value: '" + s.dest_value + "'"});
      els.push_back({kGo, "button", "Go", ""});
      els.push_back({kDealsLink, "link", "Deals", ""});
      els.push_back({kTripsLink, "link", "My Trips", ""});
      els.push_back({kHelpLink, "link", "Help", ""});
      if (s.notice) els.push_back({kNotice, "StaticText", "Please enter a destination before choosing a date.", ""});
      break;
    case Page::Results: {
      els.push_back({kHeading, "heading", "Flights to " + s.query_dest + " on " + s.query_date, ""});
      els.push_back({kHomeLink, "link", "Home", ""});
      const auto flights = sorted_flights(s.query_dest);
      if (flights.empty()) els.push_back({kFlightRow, "StaticText", "No flights found", ""});
      for (std::size_t i = 0; i < flights.size(); ++i) {
        const auto& f = flights[i];
        els.push_back({kFlightRow + static_cast<int>(i), "StaticText", f.code + " " + f.time + " " + f.price, ""});
      }
      for (std::size_t i = 0; i < flights.size(); ++i) {
        els.push_back({kBookButton + static_cast<int>(i), "button", "Book " + flights[i].code, ""});
      }
      break;
    }
    case Page::Booking:
      els.push_back({kHeading, "heading", "Booking confirmed", ""});
      els.push_back({kDestField, "StaticText",
                     "Flight " + s.booking_code + " to " + s.query_dest + " on " + s.query_date, ""});
      els.push_back({kHomeLink, "link", "Home", ""});
      break;
    case Page::Deals: {
      els.push_back({kHeading, "heading", "Deals", ""});
      els.push_back({kHomeLink, "link", "Home", ""});
      const int n = static_cast<int>(site_.deals.size());
      const int end = std::min(n, s.deals_offset + kDealsPerScreen);
      els.push_back({kDealsRange, "StaticText",
                     "Showing deals " + std::to_string(s.deals_offset + 1) + "-" + std::to_string(end) + " of " +
                         std::to_string(n),
                     ""});
      for (int i = s.deals_offset; i < end; ++i) {
        const auto& d = site_.deals[static_cast<std::size_t>(i)];
        els.push_back({kDealRow + i, "StaticText", d.title + " " + d.price, ""});
      }
      break;
    }
    case Page::Help:
      els.push_back({kHeading, "heading", "Help", ""});
      els.push_back({kHomeLink, "link", "Home", ""});
      for (std::size_t i = 0; i < site_.help.size(); ++i) {
        els.push_back({kHelpRow + static_cast<int>(i), "StaticText", site_.help[i], ""});
      }
      break;
    case Page::Trips: {
      els.push_back({kHeading, "heading", "My Trips", ""});
      els.push_back({kHomeLink, "link", "Home", ""});
      std::vector<std::string> trips = site_.trips;
      if (s.booked) {
        trips.push_back((*s.booked)["flight"].get<std::string>() + " to " + (*s.booked)["dest"].get<std::string>() +
                        " on " + (*s.booked)["date"].get<std::string>());
      }
      for (std::size_t i = 0; i < trips.size(); ++i) {
        els.push_back({kTripRow + static_cast<int>(i), "StaticText", trips[i], ""});
      }
      break;
    }
  }
  return els;
}

std::vector<WebEnv::Element> WebEnv::modal_elements() const {
  std::vector<Element> els;
  els.push_back({kDialog, "dialog", "Select travel date", ""});
  for (std::size_t i = 0; i < site_.dates.size(); ++i) {
    els.push_back({kFirstDate + static_cast<int>(i), "button", site_.dates[i], ""});
  }
  els.push_back({kFirstDate + static_cast<int>(site_.dates.size()), "button", "Close", ""});
  return els;
}

Observation WebEnv::observe(const std::string& error) const {
  std::string text;
  auto emit = [&](const Element& e) {
    if (!text.empty()) text += '\n';
    text += "[" + std::to_string(e.id) + "] " + e.role + " '" + e.label + "'" + e.suffix;
  };
  for (const auto& e : page_elements(state_)) emit(e);
  if (state_.modal_open) {
    for (const auto& e : modal_elements()) emit(e);
  }
  if (!error.empty()) text += "\nError: " + error;
  Observation obs;
  obs.text = std::move(text);
  obs.url = url(state_);
  obs.structured = snapshot();
  return obs;
}

json WebEnv::snapshot() const {
  json s = state_.to_json();
  s["url"] = url(state_);
  const std::string root = "http://" + site_.host;
  std::string path = s["url"].get<std::string>().substr(root.size());
  s["path"] = path.substr(0, path.find('?'));
  return s;
}

Observation WebEnv::reset(const TaskSpec& task, std::uint64_t /*seed*/) {
  (void)this->task(task.id);
  state_ = State{};
  back_.clear();
  forward_.clear();
  active_ = true;
  return observe();
}

void WebEnv::navigate(State next) {
  next.booked = state_.booked;
  back_.push_back(state_);
  forward_.clear();
  state_ = std::move(next);
}

std::string WebEnv::do_click(int element_id) {
  if (state_.modal_open) {
    const int close_id = kFirstDate + static_cast<int>(site_.dates.size());
    if (element_id == kDialog) return {};
    if (element_id == close_id) {
      state_.modal_open = false;
      return {};
    }
    const int date_index = element_id - kFirstDate;
    if (date_index >= 0 && date_index < static_cast<int>(site_.dates.size())) {
      state_.modal_open = false;
      if (trim(state_.dest_value).empty()) {
        state_.notice = true;
        return {};
      }
      State next;
      next.page = Page::Results;
      next.query_dest = trim(state_.dest_value);
      next.query_date = site_.dates[static_cast<std::size_t>(date_index)];
      navigate(std::move(next));
      return {};
    }
    for (const auto& e : page_elements(state_)) {
      if (e.id == element_id) return "element [" + std::to_string(element_id) + "] is blocked by the open dialog 'Select travel date'";
    }
    return "no element with id [" + std::to_string(element_id) + "] on this page";
  }

  const auto els = page_elements(state_);
  if (std::none_of(els.begin(), els.end(), [&](const Element& e) { return e.id == element_id; })) {
    return "no element with id [" + std::to_string(element_id) + "] on this page";
  }
  State next;
  switch (state_.page) {
    case Page::Home:
      if (element_id == kGo) {
        state_.modal_open = true;
        state_.notice = false;
      } else if (element_id == kDealsLink) {
        next.page = Page::Deals;
        navigate(std::move(next));
      } else if (element_id == kTripsLink) {
        next.page = Page::Trips;
        navigate(std::move(next));
      } else if (element_id == kHelpLink) {
        next.page = Page::Help;
        navigate(std::move(next));
      }
      return {};
    case Page::Results: {
      const auto flights = sorted_flights(state_.query_dest);
      const int index = element_id - kBookButton;
      if (index >= 0 && index < static_cast<int>(flights.size())) {
        next.page = Page::Booking;
        next.query_dest = state_.query_dest;
        next.query_date = state_.query_date;
        next.booking_code = flights[static_cast<std::size_t>(index)].code;
        navigate(std::move(next));
        state_.booked = json{{"flight", state_.booking_code}, {"dest", state_.query_dest}, {"date", state_.query_date}};
        return {};
      }
      break;
    }
    default:
      break;
  }
  if (element_id == kHomeLink && state_.page != Page::Home) navigate(State{});
  return {};
}

std::string WebEnv::do_type(int element_id, const std::string& text, bool press_enter) {
  if (state_.modal_open) {
    return "element [" + std::to_string(element_id) + "] is blocked by the open dialog 'Select travel date'";
  }
  const auto els = page_elements(state_);
  auto it = std::find_if(els.begin(), els.end(), [&](const Element& e) { return e.id == element_id; });
  if (it == els.end()) return "no element with id [" + std::to_string(element_id) + "] on this page";
  if (it->role != "textbox") return "element [" + std::to_string(element_id) + "] is not a text field";
  state_.dest_value = text;
  if (press_enter) {
    state_.modal_open = true;
    state_.notice = false;
  }
  return {};
}

std::string WebEnv::do_goto(const std::string& target) {
  if (state_.modal_open) return "navigation is blocked by the open dialog 'Select travel date'";
  const std::string root = "http://" + site_.host;
  State next;
  if (target == root || target == root + "/") {
    next.page = Page::Home;
  } else if (target == root + "/deals") {
    next.page = Page::Deals;
  } else if (target == root + "/help") {
    next.page = Page::Help;
  } else if (target == root + "/trips") {
    next.page = Page::Trips;
  } else {
    return "cannot open " + target + "; only the site's main pages can be opened directly";
  }
  navigate(std::move(next));
  return {};
}

StepResult WebEnv::step(const Action& action) {
  if (!active_) throw LifecycleError("step called on an inactive web episode");
  StepResult result;
  std::string error;
  if (const auto* invalid = std::get_if<InvalidAction>(&action.parsed)) {
    error = invalid->reason;
  } else if (std::holds_alternative<StopAction>(action.parsed)) {
    active_ = false;
    result.observation = observe();
    result.outcome = StepOutcome::Terminal;
    return result;
  } else if (std::holds_alternative<FunctionCall>(action.parsed)) {
    error = "function calls are not available on this site";
  } else {
    const auto& a = std::get<WebAction>(action.parsed);
    const std::string blocked = "element [" + std::to_string(a.element_id) + "] is blocked by the open dialog 'Select travel date'";
    switch (a.verb) {
      case WebVerb::Click:
        error = do_click(a.element_id);
        break;
      case WebVerb::Type:
        error = do_type(a.element_id, a.text, a.press_enter);
        break;
      case WebVerb::Hover: {
        const auto els = state_.modal_open ? modal_elements() : page_elements(state_);
        const bool present = std::any_of(els.begin(), els.end(), [&](const Element& e) { return e.id == a.element_id; });
        if (!present) {
          const auto under = page_elements(state_);
          const bool underneath = std::any_of(under.begin(), under.end(), [&](const Element& e) { return e.id == a.element_id; });
          error = underneath ? blocked : "no element with id [" + std::to_string(a.element_id) + "] on this page";
        }
        break;
      }
      case WebVerb::Press:
        break;
      case WebVerb::Scroll:
        if (!state_.modal_open && state_.page == Page::Deals) {
          const int n = static_cast<int>(site_.deals.size());
          if (a.text == "down" && state_.deals_offset + kDealsPerScreen < n) state_.deals_offset += kDealsPerScreen;
          if (a.text == "up") state_.deals_offset = std::max(0, state_.deals_offset - kDealsPerScreen);
        }
        break;
      case WebVerb::Goto:
        error = do_goto(a.text);
        break;
      case WebVerb::GoBack:
        if (state_.modal_open) {
          error = "navigation is blocked by the open dialog 'Select travel date'";
        } else if (back_.empty()) {
          error = "there is no previous page";
        } else {
          auto booked = state_.booked;
          forward_.push_back(state_);
          state_ = back_.back();
          back_.pop_back();
          state_.booked = booked;
        }
        break;
      case WebVerb::GoForward:
        if (state_.modal_open) {
          error = "navigation is blocked by the open dialog 'Select travel date'";
        } else if (forward_.empty()) {
          error = "there is no next page";
        } else {
          auto booked = state_.booked;
          back_.push_back(state_);
          state_ = forward_.back();
          forward_.pop_back();
          state_.booked = booked;
        }
        break;
      case WebVerb::NewTab:
      case WebVerb::TabFocus:
      case WebVerb::CloseTab:
        error = "tab management is not supported on this site";
        break;
    }
  }
  result.observation = observe(error);
  result.outcome = error.empty() ? StepOutcome::Ok : StepOutcome::InvalidAction;
  return result;
}

bool WebEnv::evaluate(const TaskSpec& task, const Trajectory& trajectory) const {
  if (!trajectory.terminated) return false;
  const json& state = trajectory.final_state;
  for (const auto& check : task.success) {
    if (check.contains("answer")) {
      if (!trajectory.answer) return false;
      if (normalize_whitespace(*trajectory.answer) != normalize_whitespace(check["answer"].get<std::string>())) {
        return false;
      }
    } else if (check.contains("page")) {
      if (!state.is_object() || state.value("path", "") != check["page"].get<std::string>()) return false;
    } else if (check.contains("booked")) {
      if (!state.is_object() || !state.contains("booked") || state["booked"] != check["booked"]) return false;
    } else {
      throw FormatError("unknown web success check: " + check.dump());
    }
  }
  return true;
}

}  // namespace tta::env
