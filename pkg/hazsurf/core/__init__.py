# hazsurf/core/__init__.py
