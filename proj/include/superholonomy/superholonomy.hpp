#pragma once

#include "superholonomy/bilinear.hpp"
#include "superholonomy/connection.hpp"
#include "superholonomy/derham.hpp"
#include "superholonomy/errors.hpp"
#include "superholonomy/fppf.hpp"
#include "superholonomy/grassmann.hpp"
#include "superholonomy/holonomy.hpp"
#include "superholonomy/ideals.hpp"
#include "superholonomy/lie.hpp"
#include "superholonomy/linalg.hpp"
#include "superholonomy/model.hpp"
#include "superholonomy/morphism.hpp"
#include "superholonomy/parse.hpp"
#include "superholonomy/paths.hpp"
#include "superholonomy/patch.hpp"
#include "superholonomy/points.hpp"
#include "superholonomy/rational.hpp"
#include "superholonomy/report.hpp"
#include "superholonomy/superfunction.hpp"
#include "superholonomy/supermatrix.hpp"
#include "superholonomy/transport.hpp"
