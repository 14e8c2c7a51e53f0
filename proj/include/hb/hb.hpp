#pragma once

#include "hb/bandit.hpp"
#include "hb/equivalent.hpp"
#include "hb/error.hpp"
#include "hb/game.hpp"
#include "hb/generator.hpp"
#include "hb/index.hpp"
#include "hb/io.hpp"
#include "hb/oracle.hpp"
#include "hb/reductions.hpp"
#include "hb/sampling.hpp"
#include "hb/scalar.hpp"
#include "hb/stopping.hpp"
