// Hand-labeled featurizer fixtures. n_chars counts Unicode scalar values
// after trimming outer whitespace; counts were tallied by hand.
#pragma once

#include <vector>

namespace golden {

struct Fixture {
  const char* text;
  int n_chars;
  int n_exclaim;
  int n_question;
  int n_hashtags;
  bool requests_retweet;
};

inline const std::vector<Fixture>& featurizer_fixtures() {
  static const std::vector<Fixture> fixtures{
      {"", 0, 0, 0, 0, false},
      {"Why?? Yes!!!", 12, 3, 2, 0, false},
      {"#Brexit now! #UK?", 17, 1, 1, 2, false},
      {"RT if you agree!", 16, 1, 0, 0, true},
      {"I disagree entirely.", 20, 0, 0, 0, false},
      {"Great RT by the team", 20, 0, 0, 0, false},
      {"please retweet this", 19, 0, 0, 0, true},
      {"Please RT!", 10, 1, 0, 0, true},
      {"RT to win a prize", 17, 0, 0, 0, true},
      {"retweet if you care", 19, 0, 0, 0, true},
      {"RT this now", 11, 0, 0, 0, true},
      {"My cart if broken", 17, 0, 0, 0, false},
      {"  padded  ", 6, 0, 0, 0, false},
      {"héllo wörld", 11, 0, 0, 0, false},
      {"\U0001F525\U0001F525\U0001F525", 3, 0, 0, 0, false},
      {"#1 trending", 11, 0, 0, 1, false},
      {"# nope", 6, 0, 0, 0, false},
      {"#!bang", 6, 1, 0, 0, false},
      {"end with #", 10, 0, 0, 0, false},
      {"##double", 8, 0, 0, 1, false},
      {"Is this real? Or not? Maybe?!", 29, 1, 3, 0, false},
      {"a#b", 3, 0, 0, 1, false},
      {"100% wrong!!", 12, 2, 0, 0, false},
      {"RT", 2, 0, 0, 0, false},
      {"rt if u believe", 15, 0, 0, 0, true},
      {"PLEASE RETWEET", 14, 0, 0, 0, true},
      {"Don't RT this garbage", 21, 0, 0, 0, true},
      {"FYI: RTs welcome", 16, 0, 0, 0, false},
      {"¿Qué? ¡Sí!", 10, 1, 1, 0, false},
      {"Vote now! Retweet to spread the word", 36, 1, 0, 0, true},
  };
  return fixtures;
}

}  // namespace golden
