// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hierperc/betac.hpp"
#include "hierperc/coalescent.hpp"
#include "hierperc/lattice.hpp"
#include "hierperc/momentode.hpp"
#include "hierperc/oracle.hpp"
#include "hierperc/parallel.hpp"
#include "hierperc/percsim.hpp"
#include "hierperc/renorm.hpp"
#include "hierperc/rng.hpp"
#include "hierperc/size_multiset.hpp"
#include "hierperc/stats.hpp"
#include "hierperc/union_find.hpp"
#include "hierperc/version.hpp"
