#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tta/envs/environment.hpp"

namespace tta::env {

// Toy travel-booking site rendered as an accessibility tree. Clicking Go
// (or pressing enter in the destination field) opens a date-picker modal
// instead of searching; the modal blocks every other element until a date
// is picked or it is closed.
class WebEnv final : public Environment {
 public:
  struct Flight {
    std::string code;
    std::string time;
    std::string price;  // "$279.49"
  };
  struct Deal {
    std::string title;
    std::string price;
  };
  struct Site {
    std::string host;
    std::string description;
    std::vector<std::string> dates;
    std::vector<std::pair<std::string, std::vector<Flight>>> flights;
    std::vector<Deal> deals;
    std::vector<std::string> help;
    std::vector<std::string> trips;
  };

  WebEnv(Site site, std::vector<TaskSpec> tasks);
  static std::unique_ptr<WebEnv> from_json(const nlohmann::json& fixture);

  std::string id() const override { return "web"; }
  EnvKind kind() const override { return EnvKind::Web; }
  const std::vector<TaskSpec>& tasks() const override { return tasks_; }

  using Environment::reset;
  Observation reset(const TaskSpec& task, std::uint64_t seed) override;
  StepResult step(const Action& action) override;
  nlohmann::json snapshot() const override;
  bool evaluate(const TaskSpec& task, const Trajectory& trajectory) const override;
  std::string render_tools() const override { return site_.description; }
  std::string description() const override { return site_.description; }
  std::unique_ptr<Environment> fresh() const override;

  static constexpr int kDealsPerScreen = 4;

 private:
  enum class Page { Home, Results, Booking, Deals, Help, Trips };

  struct Element {
    int id;
    std::string role;
    std::string label;
    std::string suffix;
  };

  struct State {
    Page page = Page::Home;
    std::string dest_value;
    bool modal_open = false;
    bool notice = false;
    std::string query_dest;
    std::string query_date;
    std::string booking_code;
    int deals_offset = 0;
    std::optional<nlohmann::json> booked;
    nlohmann::json to_json() const;
  };

  std::vector<Element> page_elements(const State& s) const;
  std::vector<Element> modal_elements() const;
  std::string url(const State& s) const;
  Observation observe(const std::string& error = {}) const;
  const std::vector<Flight>* flights_for(const std::string& dest) const;
  std::vector<Flight> sorted_flights(const std::string& dest) const;

  // Each returns an error message, or empty on success.
  std::string do_click(int element_id);
  std::string do_type(int element_id, const std::string& text, bool press_enter);
  std::string do_goto(const std::string& target);
  void navigate(State next);

  Site site_;
  std::vector<TaskSpec> tasks_;
  State state_;
  std::vector<State> back_;
  std::vector<State> forward_;
};

}  // namespace tta::env
