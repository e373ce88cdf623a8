# hazsurf/utils/__init__.py
